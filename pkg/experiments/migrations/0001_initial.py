from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('run_id', models.CharField(max_length=100, unique=True)),
                ('command', models.CharField(default='anneal', max_length=50)),
                ('landscape_id', models.CharField(max_length=50)),
                ('config', models.JSONField(default=dict)),
                ('status', models.CharField(choices=[('incomplete', 'Incomplete'), ('complete', 'Complete'), ('failed', 'Failed')], default='incomplete', max_length=20)),
                ('output_dir', models.CharField(max_length=500)),
                ('critical_depth', models.FloatField(blank=True, null=True)),
                ('rate', models.FloatField(blank=True, null=True)),
                ('fitted_slope', models.FloatField(blank=True, null=True)),
                ('bound_holds', models.BooleanField(blank=True, null=True)),
                ('divergence_fraction', models.FloatField(blank=True, null=True)),
                ('content_hash', models.CharField(blank=True, max_length=64)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'verbose_name': 'Experiment run',
                'verbose_name_plural': 'Experiment runs',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['landscape_id', 'status'], name='run_landscape_status_idx')],
            },
        ),
    ]
