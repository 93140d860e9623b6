//! Fusing two uploaded estimates: dissimilarity against kernel sections and
//! the closed-form fusion weights.

use nalgebra::DVector;
use rkhs_fusion::fusion_optimizer::fusion_objective;
use rkhs_fusion::prelude::*;

pub fn main() -> Result<()> {
    let domain = DomainBox::interval(-10.0, 10.0)?;
    let fs1 = FeatureSet::new((0..3).map(Feature::monomial).collect(), domain.clone())?;
    let fs2 = FeatureSet::new(vec![Feature::monomial(2), Feature::monomial(3)], domain)?;
    let basis = FusionBasis::new(&fs1, &fs2)?
        .canonical_alignment()
        .expect("aligned basis");

    let f1 = basis.upload(&fs1.function(DVector::from_vec(vec![1.0, 2.0, 0.5]))?)?;
    let f2 = basis.upload(&fs2.function(DVector::from_vec(vec![0.4, -0.3]))?)?;
    let family = DissimilarityBasis::sampled_sections(&basis, 40, vec![(-10.0, 10.0)], 2024)?;
    println!(
        "40 kernel sections span rank {} of {}",
        family.span().rank,
        family.span().dim
    );
    println!("d(f1, f2) = {:.4}", dissimilarity(&f1, &f2, &family)?);

    for ridge in [0.0, 1e-6, 1e3] {
        let r = fuse(&f1, &f2, &family, ridge)?;
        let nudged = fusion_objective(&f1, &f2, &family, ridge, r.a + 1e-3, r.b)?;
        println!(
            "ridge {ridge:>5.0e}: a = {:.6}, b = {:.6}, objective {:.6e} (nudged a: {:.6e})",
            r.a, r.b, r.objective, nudged
        );
    }

    // Identical inputs make the system singular; the minimum-norm answer splits evenly.
    let r = fuse(&f1, &f1, &family, 0.0)?;
    println!(
        "f1 with itself: a = {}, b = {}, degenerate = {}",
        r.a, r.b, r.degenerate
    );
    Ok(())
}
