# trainer_service and bench_service depend on app.models.llpacknet, which
# itself imports amplifier_service; import those two modules directly.
from .amplifier_service import (
    HistogramFeature, AmplifierMLP, log_histogram, log_amplification,
    predict_amplification, apply_amplification, train_amplifier
)
from .objective_service import (
    FeatureExtractor, GaussianBlur, LossTerms, Objective,
    l1, feature_loss, smoothed_l1, tv, weight_l1, loss_terms, loss_total,
    psnr, display_psnr, ssim
)
from .dataset_service import (
    BayerImage, PairedSample, read_bayer_pgm, write_bayer_pgm, read_ppm,
    write_rgb, write_rgb16, mosaic, synthesize_pair, sample_patch,
    generate_scene, write_dataset, load_dataset
)

__all__ = [
    # Amplifier
    "HistogramFeature", "AmplifierMLP", "log_histogram", "log_amplification",
    "predict_amplification", "apply_amplification", "train_amplifier",

    # Objective
    "FeatureExtractor", "GaussianBlur", "LossTerms", "Objective",
    "l1", "feature_loss", "smoothed_l1", "tv", "weight_l1", "loss_terms", "loss_total",
    "psnr", "display_psnr", "ssim",

    # Dataset
    "BayerImage", "PairedSample", "read_bayer_pgm", "write_bayer_pgm", "read_ppm",
    "write_rgb", "write_rgb16", "mosaic", "synthesize_pair", "sample_patch",
    "generate_scene", "write_dataset", "load_dataset",
]
