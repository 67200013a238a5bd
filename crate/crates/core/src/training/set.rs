use serde::{Deserialize, Serialize};

use super::sobol::{sobol_sample, SobolSequence};
use super::TrainingError;
use crate::field::DisplacementField;
use crate::geometry::PlateGeometry;
use crate::mechanics::MaterialParameters;

/// Axis-aligned box of bulk and shear moduli.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaBox {
    pub lower: MaterialParameters,
    pub upper: MaterialParameters,
}

impl KappaBox {
    pub fn new(lower: MaterialParameters, upper: MaterialParameters) -> Result<Self, TrainingError> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        let ok = 0.0 < self.lower.k && self.lower.k < self.upper.k && 0.0 < self.lower.g && self.lower.g < self.upper.g;
        if !ok {
            return Err(TrainingError::Config(format!("invalid parameter box {:?}..{:?}", self.lower, self.upper)));
        }
        Ok(())
    }

    pub fn contains(&self, kappa: &MaterialParameters) -> bool {
        (self.lower.k..=self.upper.k).contains(&kappa.k) && (self.lower.g..=self.upper.g).contains(&kappa.g)
    }

    /// Affine image of a point of the unit square.
    pub fn map_unit(&self, q: [f64; 2]) -> MaterialParameters {
        MaterialParameters {
            k: self.lower.k + q[0] * (self.upper.k - self.lower.k),
            g: self.lower.g + q[1] * (self.upper.g - self.lower.g),
        }
    }

    pub fn to_unit(&self, kappa: &MaterialParameters) -> [f64; 2] {
        [(kappa.k - self.lower.k) / (self.upper.k - self.lower.k), (kappa.g - self.lower.g) / (self.upper.g - self.lower.g)]
    }

    pub fn corners(&self) -> [MaterialParameters; 4] {
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]].map(|q| self.map_unit(q))
    }

    pub fn center(&self) -> MaterialParameters {
        self.map_unit([0.5, 0.5])
    }

    pub fn width(&self) -> [f64; 2] {
        [self.upper.k - self.lower.k, self.upper.g - self.lower.g]
    }
}

/// Quasi-random parameter samples inside a box.
pub fn sample_kappas(kappa_box: &KappaBox, n: usize, skip: usize) -> Vec<MaterialParameters> {
    sobol_sample(2, n, skip).into_iter().map(|q| kappa_box.map_unit([q[0], q[1]])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleCounts {
    /// Parameter samples for the physics terms.
    pub n_kappa_pde: usize,
    /// Interior collocation points per parameter sample.
    pub n_pde: usize,
    /// Points per Neumann segment and parameter sample.
    pub n_bc: usize,
    /// Parameter samples with reference data.
    pub n_kappa_data: usize,
    /// Data points per data sample.
    pub n_data: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self { n_kappa_pde: 128, n_pde: 32, n_bc: 32, n_kappa_data: 16, n_data: 64 }
    }
}

impl SampleCounts {
    pub fn has_data(&self) -> bool {
        self.n_kappa_data > 0 && self.n_data > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollocationPoint {
    pub x: [f64; 2],
    pub kappa: MaterialParameters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeumannPoint {
    pub x: [f64; 2],
    pub kappa: MaterialParameters,
    pub normal: [f64; 2],
    pub t_bar: [f64; 2],
    /// Traction components that are penalized.
    pub mask: [bool; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: [f64; 2],
    pub kappa: MaterialParameters,
    pub u: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub collocation: Vec<CollocationPoint>,
    pub neumann: Vec<NeumannPoint>,
    pub data: Vec<DataPoint>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.collocation.len() + self.neumann.len() + self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Assemble collocation, Neumann and data points.
///
/// Each parameter sample gets its own interior points, taken consecutively
/// from one Sobol stream over the bounding box (origin skipped, points inside
/// the hole rejected). Boundary points sit at uniform segment midpoints.
/// `snapshots` must hold `counts.n_kappa_data` fields of at least
/// `counts.n_data` points whenever data is requested.
pub fn build_training_set(
    geometry: &PlateGeometry,
    kappas: &[MaterialParameters],
    counts: &SampleCounts,
    symmetry_shear: bool,
    snapshots: &[(MaterialParameters, DisplacementField)],
) -> Result<TrainingSet, TrainingError> {
    geometry.validate().map_err(TrainingError::Config)?;
    if kappas.is_empty() || counts.n_pde == 0 {
        return Err(TrainingError::Config("at least one collocation point is required".into()));
    }
    let (lo, hi) = (geometry.x_min(), geometry.x_max());
    let mut stream = SobolSequence::new(2, 1);
    let mut set = TrainingSet::default();
    for kappa in kappas {
        let mut taken = 0;
        while taken < counts.n_pde {
            let q = stream.next().expect("Sobol stream is long enough for training sets");
            let x = [lo[0] + q[0] * (hi[0] - lo[0]), lo[1] + q[1] * (hi[1] - lo[1])];
            if geometry.contains(x) {
                set.collocation.push(CollocationPoint { x, kappa: *kappa });
                taken += 1;
            }
        }
    }

    let segments = geometry.neumann_segments(symmetry_shear);
    for kappa in kappas {
        for seg in &segments {
            for (x, normal) in seg.uniform_points(counts.n_bc) {
                set.neumann.push(NeumannPoint { x, kappa: *kappa, normal, t_bar: seg.t_bar, mask: seg.mask });
            }
        }
    }

    if counts.has_data() {
        if snapshots.len() != counts.n_kappa_data {
            return Err(TrainingError::MissingData(format!(
                "{} reference fields requested, {} supplied",
                counts.n_kappa_data,
                snapshots.len()
            )));
        }
        for (kappa, field) in snapshots {
            if field.len() < counts.n_data {
                return Err(TrainingError::MissingData(format!("field has {} points, {} requested", field.len(), counts.n_data)));
            }
            for (x, u) in field.points.iter().zip(&field.displacements).take(counts.n_data) {
                set.data.push(DataPoint { x: *x, kappa: *kappa, u: *u });
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryTag;

    fn train_box() -> KappaBox {
        KappaBox::new(MaterialParameters { k: 1e5, g: 6e4 }, MaterialParameters { k: 2e5, g: 1e5 }).unwrap()
    }

    #[test]
    fn kappa_samples_stay_in_box() {
        let b = train_box();
        assert!(sample_kappas(&b, 256, 0).iter().all(|k| b.contains(k)));
    }

    #[test]
    fn desk_counts_without_data() {
        let geom = PlateGeometry::quarter_plate();
        let counts = SampleCounts { n_kappa_data: 0, ..Default::default() };
        let kappas = sample_kappas(&train_box(), counts.n_kappa_pde, 0);
        let set = build_training_set(&geom, &kappas, &counts, true, &[]).unwrap();
        assert_eq!(set.collocation.len(), 128 * 32);
        assert_eq!(set.neumann.len(), 128 * 32 * 5);
        assert!(set.data.is_empty());
        assert!(set.collocation.iter().all(|p| geom.contains(p.x)));
        // fresh interior points per parameter sample
        assert_ne!(set.collocation[0].x, set.collocation[32].x);
    }

    #[test]
    fn boundary_points_carry_segment_conditions() {
        let geom = PlateGeometry::quarter_plate();
        let counts = SampleCounts { n_kappa_pde: 1, n_pde: 4, n_bc: 8, n_kappa_data: 0, n_data: 0 };
        let set = build_training_set(&geom, &[train_box().center()], &counts, true, &[]).unwrap();
        let segs = geom.neumann_segments(true);
        for (seg, chunk) in segs.iter().zip(set.neumann.chunks(8)) {
            for p in chunk {
                assert_eq!((p.t_bar, p.mask), (seg.t_bar, seg.mask));
                match seg.tag {
                    BoundaryTag::Left => assert_eq!(p.x[0], -100.0),
                    BoundaryTag::Top => assert_eq!(p.x[1], 100.0),
                    BoundaryTag::Right => assert_eq!(p.x[0], 0.0),
                    BoundaryTag::Bottom => assert_eq!(p.x[1], 0.0),
                    BoundaryTag::Hole => assert!((p.x[0].hypot(p.x[1]) - 10.0).abs() < 1e-12),
                }
            }
        }
    }

    #[test]
    fn missing_data_is_an_error() {
        let geom = PlateGeometry::quarter_plate();
        let counts = SampleCounts::default();
        let kappas = sample_kappas(&train_box(), 4, 0);
        let err = build_training_set(&geom, &kappas, &counts, true, &[]).unwrap_err();
        assert!(matches!(err, TrainingError::MissingData(_)));
    }

    #[test]
    fn data_points_are_copied() {
        let geom = PlateGeometry::quarter_plate();
        let counts = SampleCounts { n_kappa_pde: 1, n_pde: 2, n_bc: 1, n_kappa_data: 1, n_data: 2 };
        let field = DisplacementField::new(vec![[-50.0, 50.0], [-20.0, 30.0], [-60.0, 10.0]], vec![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let k = train_box().center();
        let set = build_training_set(&geom, &[k], &counts, true, &[(k, field)]).unwrap();
        assert_eq!(set.data.len(), 2);
        assert_eq!(set.data[1].u, [3.0, 4.0]);
    }
}
