from django.apps import AppConfig


class AnalysisConfig(AppConfig):
    name = 'analysis'
    verbose_name = 'Tail statistics, Gibbs quadrature and spectral checks'
