//! Agent knowledge spaces: features, kernels, Gram matrices and the
//! independence check.

use rkhs_fusion::prelude::*;

pub fn main() -> Result<()> {
    let domain = DomainBox::interval(-10.0, 10.0)?;
    let fs = FeatureSet::new((0..3).map(Feature::monomial).collect(), domain.clone())?;
    let names: Vec<String> = fs.features().iter().map(|f| f.to_string()).collect();
    println!("features: {}", names.join(", "));
    println!("K(1, 2) = {}", kernel_eval(&fs, &[1.0], &[2.0]));

    let points = vec![vec![-1.0], vec![0.0], vec![1.0]];
    println!("Gram matrix at -1, 0, 1:{}", gram_matrix(&fs, &points)?);

    // f = 1 - 2x + 0.5x², with ‖f‖² = 1 + 4 + 0.25.
    let f = fs.function(nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]))?;
    println!(
        "f(3) = {}, |f|^2 = {}",
        eval_function(&fs, &f, &[3.0])?,
        inner_product(&f, &f)?
    );
    // Reproducing property: <f, K(., y)> = f(y).
    let y = [2.5];
    println!(
        "<f, K(.,2.5)> = {} = f(2.5) = {}",
        inner_product(&f, &fs.section(&y))?,
        fs.eval(&f, &y)?
    );

    // sin(x) and sin(-x) span one function and are rejected.
    let dependent = vec![
        Feature::from(FeaturePrimitive::Sin(1.0)),
        Feature::from(FeaturePrimitive::Sin(-1.0)),
    ];
    match FeatureSet::new(dependent, domain) {
        Err(Error::DependentFeatures { null_vectors }) => {
            println!("dependent features, null direction {:?}", null_vectors[0])
        }
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
