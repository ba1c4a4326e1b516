from .calibration import apply_calibration, fit_calibration
from .lbp import lbp_infer, max_product_lbp
from .model import Annotation, PreparedDoc, decode, disambiguate_document, prepare_document, score_document
from .params import EDHyperParams, EDParams
from .scoring import encode_mentions, final_score, local_psi, mention_encode, pairwise_alpha, pairwise_phi, pairwise_tables

__all__ = [
    "Annotation", "EDHyperParams", "EDParams", "PreparedDoc",
    "apply_calibration", "decode", "disambiguate_document", "encode_mentions",
    "final_score", "fit_calibration", "lbp_infer", "local_psi", "max_product_lbp",
    "mention_encode", "pairwise_alpha", "pairwise_phi", "pairwise_tables",
    "prepare_document", "score_document",
]
