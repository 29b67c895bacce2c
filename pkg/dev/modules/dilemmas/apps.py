from django.apps import AppConfig


class DilemmasConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.dilemmas"
