//! Scene documents: a tree, an optional operator and measure, and task
//! parameters.

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use martree::measure::{arc_measure_from_q, ArcMeasure};
use martree::operator::{OperatorSpec, TransitionOperator};
use martree::rational::{parse_rational, Rational};
use martree::tree::{Tree, TreeSpec, Vertex};

use crate::error::{CliError, CliResult};

pub const SCENE_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default = "default_version")]
    pub version: u32,
    pub tree: TreeSpec,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub task: Task,
}

fn default_version() -> u32 {
    SCENE_VERSION
}

/// Split ratios per cone type, as rational strings.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub split: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub depth: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    /// Steps `K` of the universal construction.
    pub steps: Option<u64>,
    /// Radius `N` of the ball on which the seed function is kept.
    pub offset: Option<usize>,
    /// Constant value of the seed function, as a rational string.
    pub seed_value: Option<String>,
    /// Balls `m = 1, …, balls` audited around `f_m` with radius `2^{−m}`.
    pub balls: Option<usize>,
    pub walks: Option<u64>,
    pub step_cap: Option<usize>,
    /// Contour vertices such as `"o/0/1"`; defaults to the circle of the
    /// task depth.
    pub contour: Option<Vec<String>>,
    /// Dirichlet data on the contour; missing vertices get 0.
    pub boundary: Option<BTreeMap<String, f64>>,
}

/// Command-line values that override the task section.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub depth: Option<usize>,
    pub horizon: Option<usize>,
    pub tol: Option<f64>,
}

/// A scene with its objects built and cross-references resolved.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub tree: Arc<Tree>,
    pub operator: Option<TransitionOperator>,
    pub measure: Option<ArcMeasure>,
    pub task: Task,
}

impl Loaded {
    pub fn operator(&self) -> CliResult<&TransitionOperator> {
        self.operator
            .as_ref()
            .ok_or_else(|| CliError::Config("scene has no operator".into()))
    }

    /// The scene's measure, else the one induced by a forward-only
    /// operator, else the uniform split.
    pub fn measure(&self) -> CliResult<ArcMeasure> {
        if let Some(m) = &self.measure {
            return Ok(m.clone());
        }
        match &self.operator {
            Some(q) if q.is_forward_only() => arc_measure_from_q(q).map_err(|e| CliError::Config(e.to_string())),
            _ => Ok(ArcMeasure::uniform(self.tree.clone())),
        }
    }

    pub fn depth(&self) -> usize {
        self.task.depth.unwrap_or(self.tree.depth().min(3))
    }

    pub fn seed(&self) -> u64 {
        self.task.seed.unwrap_or(0)
    }

    pub fn tol(&self) -> f64 {
        self.task.tol.unwrap_or(1e-9)
    }
}

pub fn parse_scene(text: &str) -> CliResult<Scene> {
    let scene: Scene = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if scene.version != SCENE_VERSION {
        return Err(CliError::Config(format!(
            "scene version {} is not supported (expected {SCENE_VERSION})",
            scene.version
        )));
    }
    Ok(scene)
}

pub fn read_scene(path: &Path) -> CliResult<Scene> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scene(&text)
}

fn config<T>(r: martree::Result<T>, what: &str) -> CliResult<T> {
    r.map_err(|e| CliError::Config(format!("{what}: {e}")))
}

fn rationals(xs: &[String], what: &str) -> CliResult<Vec<Rational>> {
    xs.iter().map(|x| config(parse_rational(x), what)).collect()
}

/// Builds the objects of a scene and checks its cross-references.
pub fn load(scene: Scene, over: &Overrides) -> CliResult<Loaded> {
    let mut task = scene.task;
    task.seed = over.seed.or(task.seed);
    task.depth = over.depth.or(task.depth);
    task.horizon = over.horizon.or(task.horizon);
    task.tol = over.tol.or(task.tol);

    let tree = Arc::new(config(Tree::build(&scene.tree), "tree")?);
    let declared = tree.depth();
    for (name, value) in [("depth", task.depth), ("offset", task.offset)] {
        if let Some(v) = value.filter(|&v| v > declared) {
            return Err(CliError::Config(format!("{name} {v} exceeds the declared depth {declared}")));
        }
    }
    if let Some(tol) = task.tol.filter(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(CliError::Config(format!("tolerance {tol} must be positive")));
    }
    if let Some(s) = &task.seed_value {
        config(parse_rational(s), "seed_value")?;
    }
    for v in task.contour.iter().flatten().chain(task.boundary.iter().flat_map(|b| b.keys())) {
        let vertex: Vertex = config(v.parse(), "contour")?;
        config(tree.type_of(&vertex), "contour")?;
    }

    let operator = scene
        .operator
        .as_ref()
        .map(|spec| config(TransitionOperator::from_spec(tree.clone(), spec), "operator"))
        .transpose()?;

    let measure = match &scene.measure {
        None => None,
        Some(spec) => {
            for name in spec.split.keys() {
                if tree.type_by_name(name).is_none() {
                    return Err(CliError::Config(format!("measure names unknown cone type {name:?}")));
                }
            }
            let split = (0..tree.num_types())
                .map(|t| match spec.split.get(tree.type_name(t)) {
                    Some(row) => rationals(row, "measure"),
                    None if tree.is_terminal_type(t) => Ok(vec![]),
                    None => Err(CliError::Config(format!("measure has no split for type {:?}", tree.type_name(t)))),
                })
                .collect::<CliResult<Vec<_>>>()?;
            Some(config(ArcMeasure::new(tree.clone(), split), "measure")?)
        }
    };
    Ok(Loaded {
        tree,
        operator,
        measure,
        task,
    })
}
