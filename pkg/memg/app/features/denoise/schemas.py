from pydantic import BaseModel, ConfigDict, Field

from app.echo.models import EchoParams


class DenoiseRequest(BaseModel):
    """Overrides of the default synthetic benchmark. Omitted fields keep defaults."""

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={"examples": [{"n_samples": 3000, "noise_sigma": 10.0, "seed": 7}]},
    )

    components: list[EchoParams] | None = Field(default=None, min_length=1)
    fs_khz: float | None = Field(default=None, gt=0)
    n_samples: int | None = Field(default=None, ge=2)
    noise_sigma: float | None = Field(default=None, ge=0)
    quantize: bool | None = None
    seed: int | None = None
    f_e: float | None = Field(default=None, gt=0)
    tau: float | None = Field(
        default=None, gt=0, description="Gradient threshold relative to the envelope maximum."
    )
    grad_separation: int | None = Field(default=None, ge=1)


class DenoiseResponse(BaseModel):
    """PSNR report. A null PSNR means the signal equals the ground truth."""

    model_config = ConfigDict(frozen=True)

    psnr_raw_db: float | None = Field(description="PSNR of the noisy input.")
    psnr_fit_db: float | None = Field(description="PSNR of the reconstruction.")
    gain_db: float | None = Field(description="Improvement; null when the input is exact.")
    components: list[EchoParams] = Field(description="Fitted components.")
