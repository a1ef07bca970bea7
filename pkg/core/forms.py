#
# core/forms.py
#
"""
Validation of command options. Every management command feeds its parsed
options through ``RunConfigForm`` and works from the resulting ``RunConfig``.
"""
from __future__ import annotations

from dataclasses import dataclass

from django import forms
from django.conf import settings
from matplotlib import colormaps

from core.exceptions import GridSpecError
from density.models import KERNEL_FAMILIES, parse_grid_size
from density.rendering import SCALES

COMMANDS = ("compress", "render", "metrics", "bench", "sweep", "synthesize")
BACKENDS = ("serial", "parallel")


@dataclass(frozen=True)
class RunConfig:
    command: str
    epsilon: float = 0.0
    kernel: str = "gaussian"
    bandwidth: int = 7
    grid: tuple[int, int] = (1024, 1024)
    interpolate: bool = False
    workers: int = 1
    backend: str = "parallel"
    seed: int = 0
    colormap: str = "gray"
    scale: str = "linear"
    runs: int = 30


def _choices(values):
    return [(v, v) for v in values]


class RunConfigForm(forms.Form):
    command = forms.ChoiceField(choices=_choices(COMMANDS))
    epsilon = forms.FloatField(required=False)
    kernel = forms.CharField(required=False)
    bandwidth = forms.IntegerField(required=False)
    grid = forms.CharField(required=False)
    interpolate = forms.BooleanField(required=False)
    workers = forms.IntegerField(required=False)
    backend = forms.ChoiceField(choices=_choices(BACKENDS), required=False)
    seed = forms.IntegerField(required=False, min_value=0)
    colormap = forms.CharField(required=False)
    scale = forms.ChoiceField(choices=_choices(SCALES), required=False)
    runs = forms.IntegerField(required=False, min_value=1)

    def clean_epsilon(self):
        eps = self.cleaned_data.get("epsilon")
        if eps is None:
            return 0.0
        if not eps >= 0:
            raise forms.ValidationError("epsilon must be >= 0")
        return eps

    def clean_kernel(self):
        kernel = (self.cleaned_data.get("kernel") or settings.TRAJFORGE_KERNEL).lower()
        if kernel not in KERNEL_FAMILIES:
            raise forms.ValidationError(f"unknown kernel {kernel!r}; choose one of {', '.join(KERNEL_FAMILIES)}")
        return kernel

    def clean_bandwidth(self):
        bandwidth = self.cleaned_data.get("bandwidth")
        if bandwidth is None:
            bandwidth = settings.TRAJFORGE_BANDWIDTH
        if bandwidth < 1 or bandwidth % 2 == 0:
            raise forms.ValidationError("bandwidth must be a positive odd integer")
        return bandwidth

    def clean_grid(self):
        try:
            return parse_grid_size(self.cleaned_data.get("grid") or settings.TRAJFORGE_GRID)
        except GridSpecError as exc:
            raise forms.ValidationError(str(exc)) from exc

    def clean_workers(self):
        workers = self.cleaned_data.get("workers")
        if workers is None:
            workers = settings.TRAJFORGE_WORKERS
        if workers < 1:
            raise forms.ValidationError("workers must be >= 1")
        return workers

    def clean_colormap(self):
        name = self.cleaned_data.get("colormap") or "gray"
        if name not in colormaps:
            raise forms.ValidationError(f"unknown colormap {name!r}")
        return name

    def clean_runs(self):
        runs = self.cleaned_data.get("runs")
        return settings.TRAJFORGE_BENCH_RUNS if runs is None else runs

    def to_config(self) -> RunConfig:
        data = self.cleaned_data
        return RunConfig(
            command=data["command"],
            epsilon=data["epsilon"],
            kernel=data["kernel"],
            bandwidth=data["bandwidth"],
            grid=data["grid"],
            interpolate=bool(data.get("interpolate")),
            workers=data["workers"],
            backend=data.get("backend") or "parallel",
            seed=data.get("seed") or 0,
            colormap=data.get("colormap") or "gray",
            scale=data.get("scale") or "linear",
            runs=data["runs"],
        )


def errors_as_text(form: forms.Form) -> str:
    return "; ".join(f"{field}: {' '.join(messages)}" for field, messages in form.errors.items())
