from app.echo.models import EchoParams, FitResult, ParamSet, StageResult
from app.infra.model.params_model import (
    PARAMS_SCHEMA_VERSION,
    ComponentDoc,
    FrameFitDoc,
    ParamsDoc,
    StageDoc,
)
from app.shared.constants import PARAM_NAMES


def _confidence_at(fit: FitResult, k: int) -> float | None:
    if k < len(fit.component_confidences):
        return fit.component_confidences[k]
    return None


def fit_result_to_doc(fit: FitResult) -> FrameFitDoc:
    """Map a fit result to its stored form; optimizer traces are not persisted."""
    return FrameFitDoc(
        frame_index=fit.params.frame_index,
        oscillating=fit.oscillating,
        degraded=fit.degraded,
        frame_confidence=fit.frame_confidence,
        components=[
            ComponentDoc(**p.model_dump(), confidence=_confidence_at(fit, k))
            for k, p in enumerate(fit.params.components)
        ],
        stages=[
            StageDoc(name=s.name, start_loss=s.start_loss, final_loss=s.final_loss)
            for s in fit.stages
        ],
    )


def fit_doc_to_result(doc: FrameFitDoc) -> FitResult:
    """Map a stored frame fit back to a fit result."""
    components = tuple(
        EchoParams(**{name: getattr(c, name) for name in PARAM_NAMES}) for c in doc.components
    )
    return FitResult(
        params=ParamSet(components=components, frame_index=doc.frame_index),
        stages=tuple(
            StageResult(name=s.name, start_loss=s.start_loss, final_loss=s.final_loss)
            for s in doc.stages
        ),
        oscillating=doc.oscillating,
        degraded=doc.degraded,
        frame_confidence=doc.frame_confidence,
        component_confidences=tuple(c.confidence for c in doc.components),
    )


def fits_to_doc(fits: list[FitResult]) -> ParamsDoc:
    return ParamsDoc(
        schema_version=PARAMS_SCHEMA_VERSION,
        frames=[fit_result_to_doc(fit) for fit in fits],
    )
