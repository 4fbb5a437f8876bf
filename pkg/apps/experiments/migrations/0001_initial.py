# Generated by Django 4.2.28 on 2026-10-17 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "label",
                    models.CharField(
                        blank=True,
                        db_index=True,
                        help_text="Free-form sweep name used to group runs, e.g. 'task-sweep-n100'",
                        max_length=100,
                    ),
                ),
                (
                    "method",
                    models.CharField(
                        choices=[
                            ("active", "Active"),
                            ("ds", "Simple diffusion"),
                            ("df", "Diffusion with feedback"),
                            ("dm", "Diffusion with feedback and final merge"),
                        ],
                        max_length=10,
                    ),
                ),
                ("n", models.PositiveIntegerField()),
                ("tasks", models.PositiveIntegerField()),
                ("seed", models.PositiveBigIntegerField()),
                ("c_r", models.FloatField()),
                ("m_r", models.FloatField()),
                ("t_dist", models.FloatField()),
                ("efficiency_pct", models.FloatField()),
                ("msg_token", models.PositiveBigIntegerField()),
                ("msg_down", models.PositiveBigIntegerField()),
                ("msg_feedback", models.PositiveBigIntegerField()),
                ("msg_final", models.PositiveBigIntegerField()),
                ("replicated", models.PositiveIntegerField()),
                ("t_propagate", models.FloatField(blank=True, null=True)),
                ("complete", models.BooleanField(default=True)),
                ("trace_hash", models.CharField(max_length=64)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["method", "n", "tasks", "c_r", "m_r", "seed"],
                "indexes": [models.Index(fields=["method", "n", "tasks"], name="experiment_method_n_tasks_idx")],
            },
        ),
    ]
