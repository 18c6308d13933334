import logging

from app.core.config import AppConfig
from app.echo.models import Frame, InitConfig, LMConfig, PreprocessConfig, StagePlan
from app.echo.staged_fit import fit_frame, reconstruct
from app.features.fit.schemas import (
    ComponentResponse,
    FitRequest,
    FitResponse,
    StageResponse,
)
from app.shared.exceptions import UsageError


class FitService:
    """Fit single frames submitted over HTTP."""

    def __init__(self, app_config: AppConfig) -> None:
        self._max_samples = app_config.api_max_samples
        self._logger = logging.getLogger(__name__)

    def fit(self, request: FitRequest) -> FitResponse:
        """Run detection and the stage plan on the submitted frame.

        Args:
            request: Frame and settings.

        Returns:
            FitResponse: Fitted parameters and reconstruction.
        """
        if len(request.samples) > self._max_samples:
            raise UsageError(
                f"frame has {len(request.samples)} samples, limit is {self._max_samples}"
            )
        frame = Frame.from_rate(
            request.samples, request.fs_khz, frame_index=request.frame_index, f_e=request.f_e_khz
        )
        fit = fit_frame(
            frame,
            InitConfig(
                tau=request.tau,
                grad_separation=request.grad_separation,
                normalize_gradient=request.normalize_gradient,
                min_rel_amplitude=request.min_rel_amplitude,
                sigma_init=request.sigma_init,
            ),
            StagePlan.by_name(request.plan),
            LMConfig(max_iterations=request.max_iterations),
            PreprocessConfig(bandpass=request.bandpass),
        )
        self._logger.info(
            "api.fit.complete frame=%d k=%d degraded=%s",
            request.frame_index,
            len(fit.params),
            fit.degraded,
        )
        confidences = list(fit.component_confidences) + [None] * len(fit.params)
        return FitResponse(
            frame_index=request.frame_index,
            components=[
                ComponentResponse(**p.model_dump(), confidence=confidences[k])
                for k, p in enumerate(fit.params.components)
            ],
            frame_confidence=fit.frame_confidence,
            degraded=fit.degraded,
            stages=[
                StageResponse(name=s.name, start_loss=s.start_loss, final_loss=s.final_loss)
                for s in fit.stages
            ],
            reconstruction=reconstruct(fit, frame.x).tolist(),
        )
