from .backbone import FILTERS, LEAK, ConvNetBackbone
from .baseline import BaselineBiLstm, concat_final_states
from .common import (
    as_image,
    batched_embed,
    load_model_arrays,
    save_model,
    topology_hash,
)
from .da import (
    ALLOWED_RATIOS,
    UNLABELED,
    DomainAdaptationNet,
    da_loss,
    mask_target_labels,
)
from .localnet import (
    TOP_K,
    LocalNet,
    image_to_class_logits,
    image_to_class_logits_np,
    normalize_descriptors_np,
)
from .mmd import BANDWIDTH_SCALES, median_pairwise_distance, mmd, pairwise_sq_dists
from .protonet import (
    ProtoNet,
    class_prototypes_np,
    compute_prototypes,
    prototype_logits,
    prototype_logits_np,
)
from .siamese import (
    SiameseNet,
    class_mean_embeddings,
    embed_episode,
    siamese_scores_np,
)

__all__ = [
    "FILTERS", "LEAK", "ConvNetBackbone",
    "BaselineBiLstm", "concat_final_states",
    "as_image", "batched_embed", "load_model_arrays", "save_model", "topology_hash",
    "ALLOWED_RATIOS", "UNLABELED", "DomainAdaptationNet", "da_loss", "mask_target_labels",
    "TOP_K", "LocalNet", "image_to_class_logits", "image_to_class_logits_np",
    "normalize_descriptors_np",
    "BANDWIDTH_SCALES", "median_pairwise_distance", "mmd", "pairwise_sq_dists",
    "ProtoNet", "class_prototypes_np", "compute_prototypes", "prototype_logits",
    "prototype_logits_np",
    "SiameseNet", "class_mean_embeddings", "embed_episode", "siamese_scores_np",
]
