from django.apps import AppConfig


class HornConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.horn"
