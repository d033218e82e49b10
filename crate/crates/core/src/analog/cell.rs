use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::AnalogError;
use crate::config::DeviceModel;
use crate::digitmap::DigitPlanes;

fn check_cell_bits(dev: &DeviceModel, cell_bits: u32) -> Result<(), AnalogError> {
    if cell_bits == 0 || cell_bits > dev.cell_bits_max {
        return Err(AnalogError::CellBits {
            cell_bits,
            max: dev.cell_bits_max,
        });
    }
    Ok(())
}

fn noise_dist(dev: &DeviceModel) -> Option<Normal<f64>> {
    (dev.sigma_cell > 0.0).then(|| Normal::new(0.0, dev.sigma_cell).expect("finite sigma"))
}

/// Normalized conductance `d + (2^k-1)/(r-1) + ε`, clamped at zero.
pub fn digit_to_cell<R: Rng + ?Sized>(
    digit: u32,
    dev: &DeviceModel,
    cell_bits: u32,
    rng: &mut R,
) -> Result<f64, AnalogError> {
    check_cell_bits(dev, cell_bits)?;
    if digit >= 1 << cell_bits {
        return Err(AnalogError::DigitRange { digit, cell_bits });
    }
    let eps = noise_dist(dev).map_or(0.0, |n| n.sample(rng));
    Ok((digit as f64 + dev.on_off_ratio.normalized_offset(cell_bits) + eps).max(0.0))
}

/// A programmed crossbar.
///
/// Conductances are kept as `digit + offset + noise` with the three parts
/// stored separately, so column sums can drop the offset term exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CellArray {
    rows: usize,
    cols: usize,
    digits: Vec<u8>,
    noise: Vec<f64>,
    used: Vec<bool>,
    offset: f64,
    noisy: bool,
}

impl CellArray {
    /// Programs `digits` (row-major `rows × cols`); cells outside `used` are
    /// padding and hold the bare offset.
    pub fn program<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        digits: Vec<u8>,
        used: Vec<bool>,
        dev: &DeviceModel,
        cell_bits: u32,
        rng: &mut R,
    ) -> Result<Self, AnalogError> {
        assert_eq!(digits.len(), rows * cols);
        assert_eq!(used.len(), rows * cols);
        check_cell_bits(dev, cell_bits)?;
        if let Some(&d) = digits.iter().find(|&&d| d as u32 >= 1 << cell_bits) {
            return Err(AnalogError::DigitRange {
                digit: d as u32,
                cell_bits,
            });
        }
        let offset = dev.on_off_ratio.normalized_offset(cell_bits);
        let dist = noise_dist(dev);
        let noise = match &dist {
            None => vec![0.0; rows * cols],
            Some(n) => digits
                .iter()
                .zip(&used)
                .map(|(&d, &u)| {
                    if !u {
                        return 0.0;
                    }
                    let base = d as f64 + offset;
                    let g = (base + n.sample(rng)).max(0.0);
                    g - base
                })
                .collect(),
        };
        Ok(CellArray {
            rows,
            cols,
            digits,
            noise,
            used,
            offset,
            noisy: dist.is_some(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Normalized G_min offset shared by every cell.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_noisy(&self) -> bool {
        self.noisy
    }

    pub fn digit(&self, r: usize, c: usize) -> u8 {
        self.digits[r * self.cols + c]
    }

    pub fn digit_row(&self, r: usize) -> &[u8] {
        &self.digits[r * self.cols..(r + 1) * self.cols]
    }

    pub fn noise_row(&self, r: usize) -> &[f64] {
        &self.noise[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_used(&self, r: usize, c: usize) -> bool {
        self.used[r * self.cols + c]
    }

    pub fn conductance(&self, r: usize, c: usize) -> f64 {
        let i = r * self.cols + c;
        self.digits[i] as f64 + self.offset + self.noise[i]
    }

    /// Sum of used-cell conductances in row `r`.
    pub fn row_conductance(&self, r: usize) -> f64 {
        (0..self.cols)
            .filter(|&c| self.is_used(r, c))
            .map(|c| self.conductance(r, c))
            .sum()
    }

    pub fn used_cells(&self) -> usize {
        self.used.iter().filter(|&&u| u).count()
    }

    /// Mean conductance over used cells, 0 when nothing is used.
    pub fn mean_conductance(&self) -> f64 {
        let n = self.used_cells();
        if n == 0 {
            return 0.0;
        }
        (0..self.rows).map(|r| self.row_conductance(r)).sum::<f64>() / n as f64
    }
}

/// One `CellArray` per digit plane of a 2-D weight matrix.
pub fn program_array<R: Rng + ?Sized>(
    planes: &DigitPlanes,
    dev: &DeviceModel,
    rng: &mut R,
) -> Result<Vec<CellArray>, AnalogError> {
    let (rows, cols) = match planes.shape.as_slice() {
        [r, c] => (*r, *c),
        [n] => (*n, 1),
        s => (s.iter().take(s.len() - 1).product(), *s.last().unwrap_or(&1)),
    };
    planes
        .planes
        .iter()
        .map(|p| {
            CellArray::program(
                rows,
                cols,
                p.digits.clone(),
                vec![true; rows * cols],
                dev,
                planes.cell_bits,
                rng,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Design, OnOffRatio, QuantScheme};
    use crate::digitmap::decompose_weights;
    use crate::quant::{QuantParams, QuantizedTensor, Signedness};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn device(r: f64, sigma: f64) -> DeviceModel {
        DeviceModel {
            on_off_ratio: OnOffRatio(r),
            sigma_cell: sigma,
            cell_bits_max: 4,
            ..DeviceModel::ideal()
        }
    }

    #[test]
    fn offset_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = digit_to_cell(1, &device(150.0, 0.0), 1, &mut rng).unwrap();
        assert!((d - 1.006711).abs() < 1e-6);
        let d = digit_to_cell(3, &device(150.0, 0.0), 2, &mut rng).unwrap();
        assert!((d - 3.020134).abs() < 1e-6);
        assert_eq!(digit_to_cell(3, &device(f64::INFINITY, 0.0), 2, &mut rng).unwrap(), 3.0);
    }

    #[test]
    fn rejects_bad_digit_and_cell_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            digit_to_cell(4, &device(150.0, 0.0), 2, &mut rng),
            Err(AnalogError::DigitRange { .. })
        ));
        assert!(matches!(
            digit_to_cell(0, &DeviceModel::sram(), 2, &mut rng),
            Err(AnalogError::CellBits { cell_bits: 2, max: 1 })
        ));
    }

    #[test]
    fn noise_clamps_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dev = device(f64::INFINITY, 2.0);
        for _ in 0..1000 {
            assert!(digit_to_cell(0, &dev, 2, &mut rng).unwrap() >= 0.0);
        }
    }

    fn planes() -> DigitPlanes {
        let p = QuantParams::new(QuantScheme::UniformSymmetric, 4, 1.0, Signedness::Signed).unwrap();
        let w = QuantizedTensor::new(vec![3, 4], (-6..6).collect(), p).unwrap();
        decompose_weights(&w, Design::Design1, 2).unwrap()
    }

    #[test]
    fn program_without_noise_adds_constant_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let planes = planes();
        for r in [10.0, 17.0, 100.0, 150.0] {
            let arrays = program_array(&planes, &device(r, 0.0), &mut rng).unwrap();
            let off = 3.0 / (r - 1.0);
            for (a, p) in arrays.iter().zip(&planes.planes) {
                for i in 0..3 {
                    for j in 0..4 {
                        let diff = a.conductance(i, j) - p.digits[i * 4 + j] as f64;
                        assert!((diff - off).abs() < 1e-12);
                    }
                }
            }
        }
        let ideal = program_array(&planes, &device(f64::INFINITY, 0.0), &mut rng).unwrap();
        for (a, p) in ideal.iter().zip(&planes.planes) {
            assert_eq!(a.conductance(2, 3), p.digits[11] as f64);
        }
    }

    #[test]
    fn programming_is_seeded() {
        let dev = device(100.0, 0.1);
        let a = program_array(&planes(), &dev, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = program_array(&planes(), &dev, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let c = program_array(&planes(), &dev, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn padding_holds_bare_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dev = device(17.0, 0.3);
        let a = CellArray::program(2, 2, vec![1, 0, 0, 0], vec![true, false, false, false], &dev, 1, &mut rng)
            .unwrap();
        assert_eq!(a.conductance(1, 1), 1.0 / 16.0);
        assert_eq!(a.used_cells(), 1);
        assert_eq!(a.row_conductance(1), 0.0);
    }
}
