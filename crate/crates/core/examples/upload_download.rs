//! Upload is the inclusion of an agent space into the fusion space; download
//! applies √L̄ⁱ and returns coefficients in the agent's own features.

use nalgebra::DVector;
use rkhs_fusion::prelude::*;

pub fn main() -> Result<()> {
    let domain = DomainBox::interval(-10.0, 10.0)?;
    let fs1 = FeatureSet::new((0..3).map(Feature::monomial).collect(), domain.clone())?;
    let fs2 = FeatureSet::new(vec![Feature::monomial(2), Feature::monomial(3)], domain)?;
    let basis = FusionBasis::new(&fs1, &fs2)?
        .canonical_alignment()
        .expect("aligned basis");

    // x² from agent 1 has norm 1 there but 1/√2 in H, where it is shared.
    let x2 = fs1.function(DVector::from_vec(vec![0.0, 0.0, 1.0]))?;
    let up = basis.upload(&x2)?;
    println!(
        "upload(x²) = {:.4?}, |x²|_H^2 = {:.4}",
        up.coeffs().as_slice(),
        up.norm_squared()
    );
    let (g1, g2) = basis.split_components(&up)?;
    println!(
        "minimal split: agent 1 {:?}, agent 2 {:?}",
        g1.coeffs().as_slice(),
        g2.coeffs().as_slice()
    );

    // Download keeps what agent i can represent, scaled by √L̄ⁱ. On the
    // range of the projection it is an isometry onto the agent space.
    let f = basis.function(DVector::from_vec(vec![0.7, -1.2, 2.5, 0.9]))?;
    for agent in Agent::BOTH {
        let g = basis.download(&f, agent)?;
        let projected = basis.projection(agent).apply(&f)?;
        println!(
            "download to agent {agent}: {:.4?}  (agent norm {:.6}, H norm of projection {:.6})",
            g.coeffs().as_slice(),
            g.norm_squared().sqrt(),
            projected.norm()
        );
    }
    Ok(())
}
