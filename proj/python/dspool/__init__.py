"""Differentiable recurrent dominant-set clustering and pooling.

The package is a thin wrapper around the compiled extension; every public
name lives in ``dspool._core`` and is re-exported here.
"""

from dspool._core import (  # noqa: F401
    ClassifierConfig,
    ClusteringHierarchy,
    Dataset,
    DominantSetCheck,
    DominantSetResult,
    EndToEndConfig,
    EndToEndResult,
    FastTrainResult,
    ForwardResult,
    FrontEnd,
    GradientCheckResult,
    HierarchyLevel,
    LevelTrace,
    LinearClassifier,
    NumericalError,
    ObjectExample,
    Partition,
    PoolMode,
    PoolStructure,
    RecurrenceTrace,
    ReplicatorConfig,
    SynthConfig,
    SynthGroup,
    ValidationError,
    apply_hierarchy,
    average_affinities,
    backward,
    brute_force_dominant_sets,
    build_affinity,
    build_universal_hierarchy,
    check_dominant_set,
    end_to_end_train,
    evaluate,
    extract_dominant_set,
    fast_train,
    forward,
    generate_synthetic,
    gradient_check,
    induced_subgraph,
    load_affinity_file,
    load_classifier,
    load_feature_file,
    load_front_end,
    load_hierarchy,
    load_manifest,
    peel_partition,
    replicator_step,
    save_classifier,
    save_dataset,
    save_front_end,
    save_hierarchy,
    save_matrix_text,
    split_dataset,
    subset_weight,
    total_weight,
    train_classifier,
    validate_affinity,
    validate_features,
    verify_dominant_set,
)

__version__ = "0.1.0"
