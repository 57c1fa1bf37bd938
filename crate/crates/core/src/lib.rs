pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod fourier;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod problems;
pub mod proj;
pub mod solvers;
pub mod tensor;
pub mod tfactor;

pub use error::{Result, TubalError};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentResult, ProblemKind, SolverKind};
pub use fourier::{fft_tensor, ifft_tensor, t_product, CMatrix, FourierSlices, SlicePairing};
pub use proj::{
    certificate_check, project_linf, project_tnn, truncated_project_tnn, Certificate,
    ProjectionMode, ProjectionResult, TnnProjector,
};
pub use tensor::DenseTensor;
pub use tfactor::{
    average_rank, rank_r_tsvd, skinny_tsvd, slice_spectrum, spectral_norm, tnn, tsvd, tubal_rank,
    SliceSpectrum, TsvdFactors,
};
pub use diagnostics::{
    alignment_check, dual_gap_saddle, dual_gap_smooth, gsc_delta, sc_measure_saddle,
    sc_measure_smooth, ScReport,
};
pub use problems::{gen_completion, gen_rpca, BilinearSaddle, CompletionInstance, Quadratic, RpcaInstance};
pub use solvers::{
    extragradient, fista, pgd, restarted_fgm, SaddleObjective, SmoothObjective, SolverConfig,
    SolverTrace, StepSize,
};
