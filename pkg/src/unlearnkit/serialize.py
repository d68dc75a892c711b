"""JSON persistence for trained models.

The file records the architecture, flat parameter vector, regularization,
and the noise draw (kind, scale, seed); the noise vector itself is
regenerated deterministically on load.
"""

import json
from pathlib import Path

from .errors import DataError
from .models import (CharContextModel, LogisticModel, LossConfig, MlpModel,
                     Model, ModelParams, RidgeModel, SoftmaxModel)
from .training import NoiseSpec, sample_noise


def _model_spec(model: Model) -> dict:
    if isinstance(model, CharContextModel):
        return {"alphabet": model.alphabet, "context_len": model.context_len,
                "intercept": model.intercept}
    if isinstance(model, SoftmaxModel):
        return {"dim": model.dim, "classes": model.classes,
                "intercept": model.intercept}
    if isinstance(model, (LogisticModel, RidgeModel)):
        return {"dim": model.dim, "intercept": model.intercept}
    if isinstance(model, MlpModel):
        return {"dim": model.dim, "hidden": model.hidden, "classes": model.classes}
    raise DataError(f"cannot serialize architecture {model.architecture!r}")


def build_model(architecture: str, spec: dict) -> Model:
    if architecture == "char_ngram":
        return CharContextModel(spec["alphabet"], spec["context_len"],
                                spec.get("intercept", True))
    if architecture == "softmax":
        return SoftmaxModel(spec["dim"], spec["classes"], spec.get("intercept", True))
    if architecture == "logreg":
        return LogisticModel(spec["dim"], spec.get("intercept", False))
    if architecture == "ridge":
        return RidgeModel(spec["dim"], spec.get("intercept", False))
    if architecture == "mlp":
        return MlpModel(spec["dim"], spec["hidden"], spec["classes"])
    raise DataError(f"unknown architecture {architecture!r}")


def save_model(path: str | Path, model: Model, params: ModelParams,
               lam: float, noise: NoiseSpec = NoiseSpec()) -> None:
    payload = {
        "architecture": model.architecture,
        "p": params.p,
        "theta": params.theta.tolist(),
        "lambda": lam,
        "sigma": noise.sigma if noise.kind == "gaussian" else 0.0,
        "seed": noise.seed,
        "noise": {"kind": noise.kind, "sigma": noise.sigma,
                  "alpha": noise.alpha, "seed": noise.seed},
        "spec": _model_spec(model),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> tuple[Model, ModelParams, LossConfig, NoiseSpec]:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})")
    for key in ("architecture", "theta", "lambda", "spec"):
        if key not in payload:
            raise DataError(f"{path}: missing key {key!r}")
    model = build_model(payload["architecture"], payload["spec"])
    params = ModelParams(payload["theta"], payload["architecture"])
    if params.p != model.param_count:
        raise DataError(
            f"{path}: {params.p} parameters for an architecture expecting "
            f"{model.param_count}")
    noise_info = payload.get("noise", {"kind": "none", "sigma": 0.0,
                                       "alpha": 0.0, "seed": 0})
    nspec = NoiseSpec(kind=noise_info.get("kind", "none"),
                      sigma=float(noise_info.get("sigma", 0.0)),
                      alpha=float(noise_info.get("alpha", 0.0)),
                      seed=int(noise_info.get("seed", 0)))
    lcfg = LossConfig(lam=float(payload["lambda"]),
                      noise=sample_noise(model.param_count, nspec),
                      kind=model.loss_kind)
    return model, params, lcfg, nspec
