from django.apps import AppConfig


class PrimitivesConfig(AppConfig):
    name = 'primitives'
    verbose_name = "Block-parallel scan primitives"
