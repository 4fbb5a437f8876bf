from django.apps import AppConfig


class WordtreeConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.wordtree"
