from django.apps import AppConfig


class TrajectoriesConfig(AppConfig):
    name = 'trajectories'
    verbose_name = "Trajectory model and AIS ingestion"
