# Generated by Django 4.2.7 on 2026-10-18 09:12

import django.core.validators
from django.db import migrations, models


VARIANT_CHOICES = [
    ('full', 'Full pipeline'),
    ('fixed_slot', 'Fixed slot (no curve indexing)'),
    ('no_lrl', 'No luminance library'),
    ('no_srl', 'No structural library'),
    ('no_sc', 'No spectral consistency'),
    ('no_bce', 'No structure supervision'),
    ('no_library', 'No libraries in the mask stage'),
]


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='TrainingRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('seed', models.IntegerField()),
                ('variant', models.CharField(choices=VARIANT_CHOICES, default='full', max_length=20)),
                ('epochs', models.IntegerField(validators=[django.core.validators.MinValueValidator(0)])),
                ('scenes', models.IntegerField(default=0, help_text='Scenes seen per epoch')),
                ('config', models.JSONField(default=dict)),
                ('loss_history', models.JSONField(default=dict, help_text='Per-stage mean loss per epoch')),
                ('checkpoint_path', models.CharField(max_length=500)),
                ('resumed', models.BooleanField(default=False)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='EvaluationReport',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('model_path', models.CharField(max_length=500)),
                ('corpus_path', models.CharField(max_length=500)),
                ('variant', models.CharField(choices=VARIANT_CHOICES, default='full', max_length=20)),
                ('miou', models.FloatField(validators=[django.core.validators.MinValueValidator(0), django.core.validators.MaxValueValidator(1)])),
                ('mgsr', models.FloatField(validators=[django.core.validators.MinValueValidator(0), django.core.validators.MaxValueValidator(1)])),
                ('mgsr_center', models.FloatField(validators=[django.core.validators.MinValueValidator(0), django.core.validators.MaxValueValidator(1)])),
                ('scenes', models.IntegerField(default=0)),
                ('metrics', models.JSONField(default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
