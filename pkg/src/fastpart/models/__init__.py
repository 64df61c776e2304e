from .base import FeatureModel, GroundTruth, ModelBounds, project_to_ball
from .fourier import FourierDeconvolutionModel
from .gmm import GaussianMixtureModel, sample_mixture_data
from .relu import ReluFeatureModel, sample_regression_data

__all__ = [
    "FeatureModel",
    "GroundTruth",
    "ModelBounds",
    "project_to_ball",
    "GaussianMixtureModel",
    "sample_mixture_data",
    "FourierDeconvolutionModel",
    "ReluFeatureModel",
    "sample_regression_data",
]
