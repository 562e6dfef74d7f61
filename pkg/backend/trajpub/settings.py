"""
Django settings for the trajpub project.

trajpub publishes spatio-temporal trajectory datasets under differential
privacy. Django is used for settings, the management-command CLI, the run
registry and the test runner; there are no HTTP endpoints.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
import os
from dotenv import load_dotenv, find_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(find_dotenv(filename=".env"), override=True)

# Only used by Django internals (no sessions or signing happen in a CLI run).
SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "trajpub-local-cli-key")

DEBUG = os.environ.get("DJANGO_DEBUG", "0") == "1"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'trajectories',
    'privacy',
    'aptb',
    'evaluation',
    'runs',
]

# Database
# SQLite by default; the run registry moves to Postgres when POSTGRES_DB is set.

if os.environ.get("POSTGRES_DB"):
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.postgresql",
            "NAME": os.environ.get("POSTGRES_DB"),
            "USER": os.environ.get("POSTGRES_USER"),
            "PASSWORD": os.environ.get("POSTGRES_PASSWORD"),
            "HOST": os.environ.get("POSTGRES_HOST", "localhost"),
            "PORT": os.environ.get("POSTGRES_PORT", "5432"),
            "OPTIONS": {
                "connect_timeout": 10,
            },
        }
    }
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": os.environ.get("TRAJPUB_DB_PATH", str(BASE_DIR / "db.sqlite3")),
        }
    }


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

#Logging: one console handler, level from the environment
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        name: {
            "handlers": ["console"],
            "level": os.environ.get("TRAJPUB_LOG_LEVEL", "INFO"),
            "propagate": False,
        }
        for name in ("trajectories", "privacy", "aptb", "evaluation", "runs")
    },
}

#Setup for rest framework (serializers only, no views)
REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": [
        "rest_framework.renderers.JSONRenderer",
    ],
    "COERCE_DECIMAL_TO_STRING": False,
    "UNAUTHENTICATED_USER": None,
}

#Mechanism and evaluation defaults. Every key can be overridden from the environment.
def _env_float(name: str, default: float) -> float:
    return float(os.environ.get(name, default))

def _env_int(name: str, default: int) -> int:
    return int(os.environ.get(name, default))

TRAJPUB = {
    "PRE_FRACTION":       _env_float("TRAJPUB_PRE_FRACTION", 0.1),
    "THETA_FLOOR":        _env_float("TRAJPUB_THETA_FLOOR", 1.0),
    "SPLIT_RANK":         _env_float("TRAJPUB_SPLIT_RANK", 0.15),
    "SPLIT_SELECT":       _env_float("TRAJPUB_SPLIT_SELECT", 0.15),
    "SPLIT_COUNT":        _env_float("TRAJPUB_SPLIT_COUNT", 0.70),
    "SANITY_BOUND":       _env_float("TRAJPUB_SANITY_BOUND", 0.001),
    "DPCHECK_MIN_TRIALS": _env_int("TRAJPUB_DPCHECK_MIN_TRIALS", 10_000),
    "DPCHECK_MIN_OBS":    _env_int("TRAJPUB_DPCHECK_MIN_OBS", 50),
    "DPCHECK_SLACK_SE":   _env_float("TRAJPUB_DPCHECK_SLACK_SE", 3.0),
    "TINY_MAX_TRAJECTORIES": 4,
    "TINY_MAX_CELLS":        4,
    "TINY_MAX_SLOTS":        2,
}
