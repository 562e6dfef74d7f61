#!/usr/bin/env python
"""trajpub command line: publish, eval, dpcheck, synth and discretize run as
Django management commands (``python manage.py publish ...``)."""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'trajpub.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Is it installed and available on your "
            "PYTHONPATH? Install backend/requirements.txt first."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
