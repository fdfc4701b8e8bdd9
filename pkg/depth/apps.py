from django.apps import AppConfig


class DepthConfig(AppConfig):
    name = 'depth'
    verbose_name = 'Saddle heights and critical depth'
