from django.apps import AppConfig


class MinerConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.miner"
