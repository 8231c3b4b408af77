//! The README quick-start: one application of the transform, then the full
//! iteration to the normal limit.

use aluthge::{linalg, transform};

fn main() -> aluthge::Result<()> {
    let mut t = linalg::zeros(2);
    t[(0, 0)] = linalg::c(1.0, 0.0);
    t[(0, 1)] = linalg::c(1.0, 0.0);
    t[(1, 1)] = linalg::c(2.0, 0.0);

    // One application, then the full iteration.
    let once = transform::aluthge(&t, 0.5)?;
    let result = transform::limit(&t, 0.5, 1e-10, 100_000)?;
    assert!(linalg::frobenius_distance(&once, &t) > 0.1);
    assert!(result.converged);
    assert!(linalg::normality_defect(&result.limit)? < 1e-9);
    println!(
        "converged in {} iterations; final normality defect {:.3e}",
        result.iterations_used,
        linalg::normality_defect(&result.limit)?
    );
    Ok(())
}
