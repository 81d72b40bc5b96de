import numpy as np

from ..autodiff.rng import Rng
from ..types.face import FaceParams, FitPerturbation, Scene


def perturb_fit(params: FaceParams, scene: Scene, pert: FitPerturbation, rng: Rng) -> tuple[FaceParams, Scene]:
    """
    Jitter the true face and camera the way an imperfect 3DMM fit would.

    The image is always rendered with the true parameters; everything geometric downstream
    (masks from the mesh, unwrapping, position maps) uses the jittered ones. Light gain and
    occluders are left alone.

    Args:
        params: the true face
        scene: the true scene
        pert: per-quantity standard deviations; all zero gives back the inputs
        rng: stream the jitter is drawn from

    Returns:
        the fitted (FaceParams, Scene)
    """
    shape = np.asarray(params.shape_weights) + rng.normal(0.0, pert.sigma_shape, size=len(params.shape_weights))
    expr = np.asarray(params.expression_weights) + rng.normal(
        0.0, pert.sigma_expression, size=len(params.expression_weights)
    )
    d_yaw, d_pitch, d_roll = rng.normal(0.0, pert.sigma_rot, size=3)
    d_tx, d_ty = rng.normal(0.0, pert.sigma_trans, size=2)
    fitted = FaceParams(shape_weights=shape.tolist(), expression_weights=expr.tolist())
    fitted_scene = scene.model_copy(
        update={
            "yaw": scene.yaw + float(d_yaw),
            "pitch": scene.pitch + float(d_pitch),
            "roll": scene.roll + float(d_roll),
            "translation": (scene.translation[0] + float(d_tx), scene.translation[1] + float(d_ty)),
        }
    )
    return fitted, fitted_scene
