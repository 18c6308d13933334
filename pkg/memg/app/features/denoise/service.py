import logging
import math

from app.core.config import AppConfig
from app.echo.synth import BENCHMARK_INIT, SynthSpec, denoise_experiment
from app.features.denoise.schemas import DenoiseRequest, DenoiseResponse
from app.shared.exceptions import UsageError

_SPEC_FIELDS = ("fs_khz", "n_samples", "noise_sigma", "quantize", "seed", "f_e")


def _finite(value: float | None) -> float | None:
    return None if value is None or math.isinf(value) else value


class DenoiseService:
    """Run the synthetic denoising benchmark on request."""

    def __init__(self, app_config: AppConfig) -> None:
        self._max_samples = app_config.api_max_samples
        self._logger = logging.getLogger(__name__)

    def run(self, request: DenoiseRequest) -> DenoiseResponse:
        overrides: dict[str, object] = {
            name: getattr(request, name)
            for name in _SPEC_FIELDS
            if getattr(request, name) is not None
        }
        if request.components is not None:
            overrides["components"] = tuple(request.components)
        spec = SynthSpec(**overrides)
        if spec.n_samples > self._max_samples:
            raise UsageError(f"n_samples {spec.n_samples} exceeds limit {self._max_samples}")
        init_overrides = {
            name: getattr(request, name)
            for name in ("tau", "grad_separation")
            if getattr(request, name) is not None
        }
        report = denoise_experiment(spec, BENCHMARK_INIT.model_copy(update=init_overrides))
        self._logger.info("api.denoise.complete seed=%d gain=%s", spec.seed, report.gain_db)
        return DenoiseResponse(
            psnr_raw_db=_finite(report.psnr_raw_db),
            psnr_fit_db=_finite(report.psnr_fit_db),
            gain_db=_finite(report.gain_db),
            components=list(report.fit_params.components) if report.fit_params else [],
        )
