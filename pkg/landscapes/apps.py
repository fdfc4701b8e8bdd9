from django.apps import AppConfig


class LandscapesConfig(AppConfig):
    name = 'landscapes'
    verbose_name = 'Objective landscapes'
