use serde::{Deserialize, Serialize};

/// Floating-point operations per forward pass and total parameter count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    pub flops: u64,
    pub params: u64,
}

/// Complexity of a stack of dense layers with widths `dims`.
///
/// Each of the `D = dims.len() - 1` layers costs `(2 I - 1) J` flops for the
/// matrix-vector product; every layer but the last adds `J` for its
/// activation. Parameters are `(I + 1) J` per layer.
pub fn complexity_of_dims(dims: &[usize]) -> Complexity {
    if dims.len() < 2 {
        return Complexity { flops: 0, params: 0 };
    }
    let layers: Vec<(u64, u64)> = dims.windows(2).map(|p| (p[0] as u64, p[1] as u64)).collect();
    let mut flops: u64 = layers.iter().map(|&(i, j)| (2 * i - 1) * j).sum();
    flops += layers[..layers.len() - 1].iter().map(|&(_, j)| j).sum::<u64>();
    let params = layers.iter().map(|&(i, j)| (i + 1) * j).sum();
    Complexity { flops, params }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_layer() {
        let c = complexity_of_dims(&[700, 32]);
        assert_eq!(c.flops, (2 * 700 - 1) * 32);
        assert_eq!(c.flops, 44_768);
        assert_eq!(c.params, 22_432);
    }

    #[test]
    fn empty_stack() {
        assert_eq!(complexity_of_dims(&[]), Complexity { flops: 0, params: 0 });
        assert_eq!(complexity_of_dims(&[700]), Complexity { flops: 0, params: 0 });
    }

    #[test]
    fn default_autoencoder() {
        let c = complexity_of_dims(&super::super::DEFAULT_DIMS);
        assert_eq!(c.params, 858_076);
        assert_eq!(c.flops, 1_711_428);
        // published totals for the deployed network
        let rel = (c.params as f64 - 838_180.0) / 838_180.0;
        assert!(rel.abs() < 0.025, "{rel}");
    }
}
