//! Shape conformance harness: runs the network and compares every stage with
//! shapes derived independently from the layer arithmetic.

use sgqc::network::{build_network, Network, NetworkSpec};
use sgqc::tensor::Tensor;
use sgqc::Variant;

/// The reference output-shape column for variant A at alpha 1, after the input,
/// ending with the logits and the softmax.
pub const REFERENCE_SHAPES: [&[usize]; 13] = [
    &[99, 99, 1],
    &[97, 97, 2],
    &[47, 47, 2],
    &[45, 45, 4],
    &[21, 21, 4],
    &[19, 19, 8],
    &[8, 8, 8],
    &[6, 6, 16],
    &[1, 1, 16],
    &[32],
    &[32],
    &[3],
    &[3],
];

/// `valid 3×3 fuse` shrinks by 2; `5×5/2 valid pooling` maps s to (s−5)/2+1.
pub fn expected_shapes(alpha: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![99, 99, 1]];
    let mut side = 99;
    for k in [1, 2, 4, 8] {
        let c = 2 * k * alpha;
        side -= 2;
        out.push(vec![side, side, c]);
        side = (side - 5) / 2 + 1;
        out.push(vec![side, side, c]);
    }
    out.extend([vec![32], vec![32], vec![3], vec![3]]);
    out
}

/// Shapes observed in an actual forward pass, starting with the prepared input.
pub fn observed_shapes(variant: Variant, alpha: usize) -> Vec<Vec<usize>> {
    let spec = NetworkSpec::minception(variant, alpha);
    let store = build_network(&spec, 0).unwrap();
    let net = Network::new(&spec).unwrap();
    let image = Tensor::full(&[299, 299, 1], 0.5);
    let x = net.prepare(&image).unwrap();
    let trace = net.forward_prepared(&x, &store.params).unwrap();
    let mut shapes = vec![x.shape().to_vec()];
    shapes.extend(trace.stage_shapes());
    shapes
}

/// Compares observed, closed-form and (for alpha 1) reference shapes.
pub fn check(variant: Variant, alpha: usize) -> Result<(), String> {
    let observed = observed_shapes(variant, alpha);
    let expected = expected_shapes(alpha);
    if observed != expected {
        return Err(format!("{variant} α={alpha}: observed {observed:?}, expected {expected:?}"));
    }
    let declared: Vec<Vec<usize>> = NetworkSpec::minception(variant, alpha)
        .layer_shapes()
        .map_err(|e| e.to_string())?
        .into_iter()
        .skip(1)
        .map(|(_, s)| s)
        .collect();
    if declared != expected {
        return Err(format!("{variant} α={alpha}: layer_shapes {declared:?}"));
    }
    if alpha == 1 && expected.iter().map(Vec::as_slice).ne(REFERENCE_SHAPES) {
        return Err("closed form disagrees with the reference column".into());
    }
    Ok(())
}
