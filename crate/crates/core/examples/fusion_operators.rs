//! The fusion space of {1, x, x²} and {x², x³}: null space, orthonormal
//! basis, the operators L̄ⁱ and their square roots.

use rkhs_fusion::prelude::*;

pub fn main() -> Result<()> {
    let domain = DomainBox::interval(-10.0, 10.0)?;
    let fs1 = FeatureSet::new((0..3).map(Feature::monomial).collect(), domain.clone())?;
    let fs2 = FeatureSet::new(vec![Feature::monomial(2), Feature::monomial(3)], domain)?;
    let basis = FusionBasis::new(&fs1, &fs2)?;
    println!("raw features {}, rank {}", basis.raw_dim(), basis.rank());
    println!("null space (x² counted twice):{:.4}", basis.null_space());

    let basis = basis.canonical_alignment().expect("monomial features align");
    println!("aligned transform T:{:.4}", basis.transform());
    println!(
        "K(2, 3) = {} (1 + xy + 2x²y² + x³y³ = 1 + 6 + 72 + 216)",
        fusion_kernel(&basis, &[2.0], &[3.0])
    );

    for agent in Agent::BOTH {
        let l = basis.operator_matrix(agent);
        let root = basis.sqrt_operator_matrix(agent)?;
        println!("L{agent}:{:.4}sqrt L{agent}:{:.4}", l.matrix(), root.matrix());
    }
    let sum = basis.operator_matrix(Agent::One).matrix() + basis.operator_matrix(Agent::Two).matrix();
    println!(
        "L1 + L2 = I up to {:.1e}",
        (sum - nalgebra::DMatrix::identity(4, 4)).amax()
    );
    Ok(())
}
