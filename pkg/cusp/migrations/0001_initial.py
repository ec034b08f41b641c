from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("graph_path", models.CharField(max_length=500)),
                ("features_path", models.CharField(blank=True, default="", max_length=500)),
                ("labels_path", models.CharField(blank=True, default="", max_length=500)),
                ("config_text", models.TextField(blank=True, default="")),
                ("output_dir", models.CharField(max_length=500)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
                ("status", models.CharField(
                    choices=[("pending", "Pending"), ("processing", "Processing"),
                             ("ready", "Ready"), ("failed", "Failed")],
                    default="pending", max_length=12)),
                ("error", models.TextField(blank=True, null=True)),
                ("metric_name", models.CharField(blank=True, default="", max_length=8)),
                ("metric", models.FloatField(blank=True, null=True)),
            ],
            options={"ordering": ["-created_at"]},
        ),
    ]
