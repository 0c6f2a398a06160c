//! On-disk formats: the project file (plant, parameters, propositions,
//! specification), the abstraction file, the strategy file, and run
//! artifacts. All numeric fields round-trip bit-exactly through JSON via
//! shortest-representation floats; writes are atomic.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::abstraction::{Abstraction, LabelSetInfo, Params};
use crate::error::{Error, Result};
use crate::game::{AltSystem, Strategy};
use crate::logic::parser::{parse, PropositionTable};
use crate::logic::Formula;
use crate::numerics::{GridSpec, Matrix, Polytope};
use crate::plant::{LinearSystem, DEFAULT_DENSE, DEFAULT_SUBSTEPS};

/// Plant block: matrices row-major, input/state sets as vertex lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// Optional parameter block; missing fields are filled by the search.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamsSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfSpaceSpec {
    pub c: Vec<f64>,
    pub d: f64,
}

/// The project file tying everything together.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectFile {
    pub plant: PlantSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSpec>,
    pub propositions: BTreeMap<String, HalfSpaceSpec>,
    pub spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_substeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense_substeps: Option<usize>,
}

impl ProjectFile {
    pub fn load(path: &Path) -> Result<ProjectFile> {
        let text = std::fs::read_to_string(path)?;
        let p: ProjectFile = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_string_pretty(self)?)
    }

    pub fn to_system(&self) -> Result<LinearSystem> {
        let mk = |rows: &Vec<Vec<f64>>, name: &str| -> Result<Matrix> {
            Matrix::from_rows(rows).map_err(|e| Error::Schema(format!("matrix {name}: {e}")))
        };
        let poly = |verts: &Vec<Vec<f64>>, name: &str| -> Result<Polytope> {
            Polytope::new(verts.clone()).map_err(|e| Error::Schema(format!("polytope {name}: {e}")))
        };
        LinearSystem::new(
            mk(&self.plant.a, "A")?,
            mk(&self.plant.b, "B")?,
            mk(&self.plant.g, "G")?,
            poly(&self.plant.x, "X")?,
            poly(&self.plant.u, "U")?,
            poly(&self.plant.v, "V")?,
        )
    }

    pub fn proposition_table(&self) -> Result<PropositionTable> {
        let mut t = PropositionTable::new();
        for (name, h) in &self.propositions {
            t.bind(name, h.c.clone(), h.d)?;
        }
        Ok(t)
    }

    pub fn parse_spec(&self) -> Result<Formula> {
        parse(&self.spec, &self.proposition_table()?)
    }

    pub fn n_substeps(&self) -> usize {
        self.n_substeps.unwrap_or(DEFAULT_SUBSTEPS)
    }

    pub fn dense_substeps(&self) -> usize {
        self.dense_substeps.unwrap_or(DEFAULT_DENSE)
    }

    pub fn from_system(sys: &LinearSystem, props: &PropositionTable, spec: &str) -> ProjectFile {
        ProjectFile {
            plant: PlantSpec {
                a: sys.a.to_rows(),
                b: sys.b.to_rows(),
                g: sys.g.to_rows(),
                x: sys.x_space.vertices().to_vec(),
                u: sys.u_space.vertices().to_vec(),
                v: sys.v_space.vertices().to_vec(),
            },
            params: None,
            propositions: props
                .iter()
                .map(|(n, (c, d))| (n.clone(), HalfSpaceSpec { c: c.clone(), d: *d }))
                .collect(),
            spec: spec.to_string(),
            initial: None,
            n_substeps: None,
            dense_substeps: None,
        }
    }
}

/// Abstraction file: states, labels, transitions as index quadruples, the
/// parameter block, and the label-set error accounting; deterministic
/// ordering throughout for reproducible diffs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbstractionFile {
    pub params: Params,
    pub n_substeps: usize,
    pub states: Vec<Vec<f64>>,
    pub control_labels: Vec<Vec<f64>>,
    pub disturbance_labels: Vec<Vec<f64>>,
    pub transitions: Vec<(u32, u32, u32, u32)>,
    pub blocking: Vec<(u32, u32, u32)>,
    pub control_label_info: LabelSetInfo,
    pub disturbance_label_info: LabelSetInfo,
}

impl AbstractionFile {
    pub fn from_abstraction(abs: &Abstraction) -> AbstractionFile {
        AbstractionFile {
            params: abs.params,
            n_substeps: abs.n_substeps,
            states: abs.system.states.clone(),
            control_labels: abs.system.control_labels.clone(),
            disturbance_labels: abs.system.disturbance_labels.clone(),
            transitions: abs.system.transitions(),
            blocking: abs.blocking.clone(),
            control_label_info: abs.control_label_info,
            disturbance_label_info: abs.disturbance_label_info,
        }
    }

    pub fn to_abstraction(&self) -> Result<Abstraction> {
        let mut system = AltSystem::new(
            self.states.clone(),
            self.control_labels.clone(),
            self.disturbance_labels.clone(),
        )?;
        let nq = self.states.len() as u32;
        let na = self.control_labels.len() as u32;
        let nb = self.disturbance_labels.len() as u32;
        for &(q, a, b, q2) in &self.transitions {
            if q >= nq || a >= na || b >= nb || q2 >= nq {
                return Err(Error::Schema(format!("transition index out of range: {:?}", (q, a, b, q2))));
            }
            system.add_transition(q as usize, a as usize, b as usize, q2 as usize);
        }
        let grid = GridSpec::new(self.params.eta, self.states[0].len())?;
        let state_keys = self.states.iter().map(|s| grid.nearest_key(s)).collect();
        Ok(Abstraction {
            system,
            params: self.params,
            state_keys,
            blocking: self.blocking.clone(),
            control_label_info: self.control_label_info,
            disturbance_label_info: self.disturbance_label_info,
            n_substeps: self.n_substeps,
        })
    }

    pub fn load(path: &Path) -> Result<AbstractionFile> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_string(self)?)
    }
}

/// Strategy file: the memory automaton and the choice table, flattened to
/// index triples for a stable JSON form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyFile {
    pub memory_count: usize,
    pub initial_memory: usize,
    pub n_controls: usize,
    /// (memory, observed state, next memory)
    pub updates: Vec<(u32, u32, u32)>,
    /// (memory, state, labels)
    pub choices: Vec<(u32, u32, Vec<u32>)>,
    /// States the synthesis declared winning, with their fixpoint ranks.
    pub winning: Vec<(u32, u32)>,
}

impl StrategyFile {
    pub fn from_strategy(s: &Strategy, winning: &[(u32, u32)]) -> StrategyFile {
        StrategyFile {
            memory_count: s.memory_count,
            initial_memory: s.initial_memory,
            n_controls: s.n_controls,
            updates: s.updates.iter().map(|(&(m, q), &m2)| (m, q, m2)).collect(),
            choices: s.choices.iter().map(|(&(m, q), c)| (m, q, c.clone())).collect(),
            winning: winning.to_vec(),
        }
    }

    pub fn to_strategy(&self) -> Strategy {
        Strategy {
            memory_count: self.memory_count,
            initial_memory: self.initial_memory,
            n_controls: self.n_controls,
            updates: self.updates.iter().map(|&(m, q, m2)| ((m, q), m2)).collect(),
            choices: self.choices.iter().map(|(m, q, c)| ((*m, *q), c.clone())).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<StrategyFile> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_string(self)?)
    }
}

/// Write-temp-then-rename in the target's directory.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Minimal SVG polyline plot of a set of 2-D curves.
pub fn svg_plot(curves: &[(&str, Vec<(f64, f64)>)], title: &str) -> String {
    let (w, h) = (640.0, 480.0);
    let margin = 48.0;
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, pts) in curves {
        for &(x, y) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        if *hi - *lo < 1e-12 {
            *lo -= 0.5;
            *hi += 0.5;
        }
    };
    pad(&mut xmin, &mut xmax);
    pad(&mut ymin, &mut ymax);
    let sx = (w - 2.0 * margin) / (xmax - xmin);
    let sy = (h - 2.0 * margin) / (ymax - ymin);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        margin, title
    );
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = margin,
        r = w - margin,
        t = margin,
        b = h - margin,
    ));
    for (i, (name, pts)) in curves.iter().enumerate() {
        let color = colors[i % colors.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    margin + (x - xmin) * sx,
                    h - margin - (y - ymin) * sy
                )
            })
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{name}</text>\n",
            w - margin - 120.0,
            margin + 16.0 * i as f64,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn project_round_trips_bit_exactly() {
        let sys = fixtures::scalar_s1();
        let props = fixtures::s1_propositions();
        let mut p = ProjectFile::from_system(&sys, &props, fixtures::S1_SPEC);
        // adversarial float values
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        p.plant.a[0][0] = -rng.gen_range(0.1..2.0f64).powf(0.5) / 3.0;
        p.params = Some(ParamsSpec {
            tau: Some(0.1 + f64::EPSILON),
            eta: Some(1.0 / 3.0),
            mu: None,
            eps: Some(f64::MIN_POSITIVE),
            delta: None,
        });
        let dir = std::env::temp_dir().join("symcon_test_project");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.json");
        p.save(&path).unwrap();
        let q = ProjectFile::load(&path).unwrap();
        assert_eq!(p.plant.a, q.plant.a);
        assert_eq!(p.params.as_ref().unwrap().tau, q.params.as_ref().unwrap().tau);
        assert_eq!(p.params.as_ref().unwrap().eta, q.params.as_ref().unwrap().eta);
        assert_eq!(p.params.as_ref().unwrap().eps, q.params.as_ref().unwrap().eps);
        assert_eq!(p.spec, q.spec);
    }

    #[test]
    fn abstraction_file_round_trips() {
        let pipe = fixtures::s1_pipeline().unwrap();
        let file = AbstractionFile::from_abstraction(&pipe.abs);
        let json = serde_json::to_string(&file).unwrap();
        let back: AbstractionFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file.states, back.states);
        assert_eq!(file.transitions, back.transitions);
        let abs2 = back.to_abstraction().unwrap();
        assert_eq!(abs2.system, pipe.abs.system);
        assert_eq!(abs2.state_keys, pipe.abs.state_keys);
    }

    #[test]
    fn strategy_file_round_trips() {
        let pipe = fixtures::s1_pipeline().unwrap();
        let winning: Vec<(u32, u32)> = pipe
            .report
            .winning_states()
            .iter()
            .map(|&q| (q as u32, pipe.report.rank[q]))
            .collect();
        let file = StrategyFile::from_strategy(&pipe.report.strategy, &winning);
        let json = serde_json::to_string(&file).unwrap();
        let back: StrategyFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_strategy(), pipe.report.strategy);
    }

    #[test]
    fn svg_plot_emits_polylines() {
        let svg = svg_plot(&[("x0", vec![(0.0, 0.0), (1.0, 1.0)])], "demo");
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("</svg>"));
    }
}
