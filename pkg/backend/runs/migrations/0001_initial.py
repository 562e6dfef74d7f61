from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='PublishRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('publish', 'Publish'), ('dpcheck', 'Empirical DP check')], default='publish', max_length=16)),
                ('mechanism', models.CharField(max_length=16)),
                ('seed', models.BigIntegerField()),
                ('total_epsilon', models.FloatField()),
                ('max_path_sum', models.FloatField(blank=True, null=True)),
                ('input_sha256', models.CharField(max_length=64)),
                ('manifest_path', models.CharField(blank=True, default='', max_length=1024)),
                ('published_count', models.PositiveIntegerField(default=0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
            },
        ),
    ]
