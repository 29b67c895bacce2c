from django.apps import AppConfig


class LexiconConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "modules.lexicon"
