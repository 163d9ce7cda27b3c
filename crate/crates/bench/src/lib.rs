//! Fixtures shared by the benchmarks.

use num_complex::Complex64;
use outliers_core::ensembles::{assemble_model, sample_entry_matrix};
use outliers_core::gaf::{sample_gaf_series, SeriesKind};
use outliers_core::{ComplexMatrix, DeformationKind, EntryLaw, RngStream, Role};

/// One sample of `A + σX/√N` for the nilpotent shift with `σ² = 1/2`.
pub fn shift_model(n: usize, law: EntryLaw) -> ComplexMatrix {
    let a = DeformationKind::NilpotentShift.build(n).expect("shift").a;
    let x = sample_entry_matrix(law, n, RngStream::new(0, 0, Role::Entries));
    assemble_model(&a, std::f64::consts::FRAC_1_SQRT_2, &x).expect("model")
}

/// Coefficients of a truncated inner-series GAF with `σ² = 1/2`.
pub fn inner_series(truncation: usize) -> (SeriesKind, Vec<Complex64>) {
    let kind = SeriesKind::InnerSeries {
        sigma: std::f64::consts::FRAC_1_SQRT_2,
    };
    let coeffs = sample_gaf_series(kind, truncation, RngStream::new(0, 0, Role::Gaf)).expect("series");
    (kind, coeffs)
}
