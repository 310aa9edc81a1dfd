"""Contextual labeling of 3D scene segments with a pairwise Markov network."""
from .scene import (CameraView, LabelMode, LabelSpace, Labeling, Scene, Segment,
                    StructureError, hamming_loss, validate_labeling)
from .segmentation import SegmentationParams, build_graph, segment_scene
from .features import FeatureParams, edge_features, node_features
from .graph import FeatureCache, SceneGraph, build_scene_graph
from .model import (ConfigurationError, ModelConfig, Scheme, Weights, discriminant,
                    joint_feature_map, parameter_count)
from .inference import (QPInstance, RoundingPolicy, compile_qp, infer_exact, infer_mip,
                        infer_relaxed, round_relaxed)
from .learning import TrainingExample, loss_augmented_infer, predict, train
from .evaluation import PRReport, context_sweep, cross_validate, kfold_split, score
from .labelspaces import home_space, office_space

__version__ = "0.1.0"
