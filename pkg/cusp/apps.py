from django.apps import AppConfig


class CuspConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "cusp"

    def ready(self):
        from . import signals
