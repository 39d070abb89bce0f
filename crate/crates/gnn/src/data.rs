//! Turns point clouds into training instances: per-axis minmax
//! normalization, k-NN graph on normalized positions, feature reweighting.

use std::path::Path;

use graphvar_core::io::{read_pointcloud, AffineRecord, Features};
use graphvar_core::solvers::solve_pd;
use graphvar_core::{feature_weights, knn_graph, Graph, PointCloud, Signal, SolverConfig};

use crate::error::Result;
use crate::model::GraphIndex;

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub graph: Graph,
    pub index: GraphIndex,
    /// Normalized input features.
    pub f0: Signal,
    /// Normalization of the processed features, to map outputs back.
    pub record: AffineRecord,
    /// Precomputed solver output on `f0`, for distillation and evaluation.
    pub target: Option<Signal>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub features: Features,
    pub k: usize,
    pub kappa: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: Features::Coords,
            k: 4,
            kappa: 1e4,
        }
    }
}

pub fn prepare_instance(name: &str, cloud: &PointCloud, config: &PipelineConfig) -> Result<Instance> {
    cloud.validate()?;
    let positions = AffineRecord::fit(&cloud.positions);
    let normalized = PointCloud::new(cloud.positions.iter().map(|&p| positions.apply(p)).collect());
    let rows = config.features.rows(cloud)?;
    let record = AffineRecord::fit(rows);
    let f0 = Signal::from_rows(&rows.iter().map(|&p| record.apply(p)).collect::<Vec<_>>());
    let graph = knn_graph(&normalized, config.k)?;
    let graph = feature_weights(&graph, &f0, config.kappa)?;
    Ok(Instance {
        name: name.to_string(),
        index: GraphIndex::new(&graph),
        graph,
        f0,
        record,
        target: None,
    })
}

pub fn load_instance(path: &Path, config: &PipelineConfig) -> Result<Instance> {
    let cloud = read_pointcloud(path)?;
    prepare_instance(&path.display().to_string(), &cloud, config)
}

/// Runs the reference solver on the instance and stores its output as target.
pub fn attach_solver_target(instance: &mut Instance, solver: &SolverConfig) -> Result<()> {
    let (f, _) = solve_pd(&instance.graph, &instance.f0, solver)?;
    instance.target = Some(f);
    Ok(())
}

/// Maps normalized features back to the original frame.
pub fn denormalize(record: &AffineRecord, f: &Signal) -> Signal {
    let rows: Vec<[f64; 3]> = f
        .rows()
        .map(|r| record.invert([r[0], r[1], r[2]]))
        .collect();
    Signal::from_rows(&rows)
}
