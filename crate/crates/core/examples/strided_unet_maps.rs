//! Builds the kernel maps of a two-level encoder/decoder: a stride-2
//! downsampling convolution, its transposed map for upsampling, and checks
//! that the round trip returns to the original coordinates. Also verifies
//! the backward pass of the downsampling step against finite differences.
//!
//!     cargo run --release --example strided_unet_maps

use lidarseg::sparse::{
    build_kernel_map, conv_backward, conv_gather_scatter, output_coords, ConvSpec, ConvWeights, Coords, SparseTensor,
};

fn main() -> lidarseg::Result<()> {
    let coords = Coords::new(3, vec![0, 0, 0, 1, 0, 0, 1, 1, 0, 2, 2, 1, 3, 2, 1, 5, 5, 5])?.sorted_unique();
    let down_spec = ConvSpec::generalized(2, 3, 2, 1, 1);
    let coarse = output_coords(&coords, &down_spec)?;
    let down = build_kernel_map(&coords, &coarse, &down_spec)?;
    let up = down.transpose(&coords)?;
    println!("fine {} rows -> coarse {} rows", coords.len(), coarse.len());
    for (i, c) in coarse.iter().enumerate() {
        let children: Vec<_> = down
            .all_pairs()
            .iter()
            .flatten()
            .filter(|p| p.output as usize == i)
            .map(|p| coords.row(p.input as usize).to_vec())
            .collect();
        println!("  {c:?} <- {children:?}");
    }
    assert_eq!(up.out_coords(), &coords);

    let x = SparseTensor::new(
        coords.clone(),
        (0..coords.len()).map(|i| i as f64 + 1.0).collect(),
        1,
        1,
    )?;
    let w = ConvWeights::for_spec(&down_spec, (1..=8).map(|k| k as f64 * 0.25).collect())?;
    let (y, _) = conv_gather_scatter(&x, &w, &down)?;
    let ones = SparseTensor::new(y.coords().clone(), vec![1.0; y.len()], 1, y.stride())?;
    let (grad_x, _) = conv_backward(&ones, &x, &w, &down)?;

    let h = 1e-6;
    let sum = |x: &SparseTensor<f64>| -> lidarseg::Result<f64> {
        Ok(conv_gather_scatter(x, &w, &down)?.0.features().iter().sum())
    };
    for j in 0..x.len() {
        let (mut hi, mut lo) = (x.clone(), x.clone());
        hi.features_mut()[j] += h;
        lo.features_mut()[j] -= h;
        let numeric = (sum(&hi)? - sum(&lo)?) / (2.0 * h);
        println!(
            "d sum / d x[{j}]: analytic {:.6}, numeric {numeric:.6}",
            grad_x.features()[j]
        );
    }
    Ok(())
}
