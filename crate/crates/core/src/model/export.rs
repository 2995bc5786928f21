//! File formats: free MPS, CBF and the native model json.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{HullBlock, ModelError, NonlinearExpr, OptModel, Sense, VarId, VarKind};

pub const MODEL_SCHEMA: &str = "ogf-model/1";

pub trait ModelExporter: Send + Sync {
    fn name(&self) -> &'static str;
    fn write(&self, model: &OptModel, out: &mut dyn Write) -> Result<(), ModelError>;
}

#[derive(Clone)]
pub struct ExporterRegistry {
    exporters: BTreeMap<&'static str, Arc<dyn ModelExporter>>,
}

impl ExporterRegistry {
    pub fn register(&mut self, e: Arc<dyn ModelExporter>) {
        self.exporters.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ModelExporter>, ModelError> {
        self.exporters
            .get(name)
            .cloned()
            .ok_or_else(|| ModelError::UnknownFormat(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.exporters.keys().copied().collect()
    }
}

impl Default for ExporterRegistry {
    fn default() -> Self {
        let mut r = Self {
            exporters: BTreeMap::new(),
        };
        r.register(Arc::new(MpsExporter));
        r.register(Arc::new(CbfExporter));
        r.register(Arc::new(JsonExporter));
        r
    }
}

/// Exports a frozen model in the named format.
pub fn export(model: &OptModel, format: &str) -> Result<Vec<u8>, ModelError> {
    let exporter = ExporterRegistry::default().get(format)?;
    let mut buf = Vec::new();
    exporter.write(model, &mut buf)?;
    Ok(buf)
}

fn mps_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Free-format MPS for linear models with binaries.
pub struct MpsExporter;

impl ModelExporter for MpsExporter {
    fn name(&self) -> &'static str {
        "mps"
    }

    fn write(&self, m: &OptModel, out: &mut dyn Write) -> Result<(), ModelError> {
        if !m.is_frozen() {
            return Err(ModelError::NotFrozen);
        }
        if !m.cones().is_empty() {
            return Err(ModelError::Unsupported {
                format: "mps",
                what: format!("{} cone rows", m.cones().len()),
            });
        }
        if !m.nonlinear_rows().is_empty() {
            return Err(ModelError::Unsupported {
                format: "mps",
                what: format!("{} nonlinear rows", m.nonlinear_rows().len()),
            });
        }
        let n = m.variables().len();
        let mut columns: Vec<Vec<(String, f64)>> = vec![Vec::new(); n];
        for &(v, c) in m.objective() {
            columns[v.0].push(("obj".into(), c));
        }
        for r in m.rows() {
            for &(v, a) in &r.terms {
                columns[v.0].push((mps_name(&r.name), a));
            }
        }

        writeln!(out, "NAME {}", mps_name(&m.name))?;
        writeln!(out, "OBJSENSE")?;
        writeln!(out, "    MINIMIZE")?;
        writeln!(out, "ROWS")?;
        writeln!(out, " N obj")?;
        for r in m.rows() {
            let s = match r.sense {
                Sense::Le => "L",
                Sense::Eq => "E",
                Sense::Ge => "G",
            };
            writeln!(out, " {s} {}", mps_name(&r.name))?;
        }
        writeln!(out, "COLUMNS")?;
        let mut in_int = false;
        for (j, var) in m.variables().iter().enumerate() {
            let is_int = var.kind == VarKind::Binary;
            if is_int != in_int {
                let tag = if is_int { "INTORG" } else { "INTEND" };
                writeln!(out, "    MARKER 'MARKER' '{tag}'")?;
                in_int = is_int;
            }
            let col = mps_name(&var.name);
            if columns[j].is_empty() {
                writeln!(out, "    {col} obj {}", num(0.0))?;
            }
            for (row, a) in &columns[j] {
                writeln!(out, "    {col} {row} {}", num(*a))?;
            }
        }
        if in_int {
            writeln!(out, "    MARKER 'MARKER' 'INTEND'")?;
        }
        writeln!(out, "RHS")?;
        if m.objective_constant() != 0.0 {
            writeln!(out, "    rhs obj {}", num(-m.objective_constant()))?;
        }
        for r in m.rows() {
            if r.rhs != 0.0 {
                writeln!(out, "    rhs {} {}", mps_name(&r.name), num(r.rhs))?;
            }
        }
        writeln!(out, "BOUNDS")?;
        for var in m.variables() {
            let col = mps_name(&var.name);
            let (lo, hi) = (var.lower, var.upper);
            if var.kind == VarKind::Binary && lo == 0.0 && hi == 1.0 {
                writeln!(out, " BV bnd {col}")?;
            } else if lo == hi {
                writeln!(out, " FX bnd {col} {}", num(lo))?;
            } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                writeln!(out, " FR bnd {col}")?;
            } else {
                if lo == f64::NEG_INFINITY {
                    writeln!(out, " MI bnd {col}")?;
                } else {
                    writeln!(out, " LO bnd {col} {}", num(lo))?;
                }
                if hi != f64::INFINITY {
                    writeln!(out, " UP bnd {col} {}", num(hi))?;
                }
            }
        }
        writeln!(out, "ENDATA")?;
        Ok(())
    }
}

/// Conic benchmark format, version 3. Bounds are written as rows and each
/// cone `y >= x^2` as the rotated cone `2 * y * 0.5 >= x^2`.
pub struct CbfExporter;

impl ModelExporter for CbfExporter {
    fn name(&self) -> &'static str {
        "cbf"
    }

    fn write(&self, m: &OptModel, out: &mut dyn Write) -> Result<(), ModelError> {
        if !m.is_frozen() {
            return Err(ModelError::NotFrozen);
        }
        if !m.nonlinear_rows().is_empty() {
            return Err(ModelError::Unsupported {
                format: "cbf",
                what: format!("{} nonlinear rows", m.nonlinear_rows().len()),
            });
        }
        // each group: (domain, [(var, coef)] per scalar row, [constant per row])
        let mut groups: Vec<(&str, Vec<Vec<(VarId, f64)>>, Vec<f64>)> = Vec::new();
        for r in m.rows() {
            let dom = match r.sense {
                Sense::Le => "L-",
                Sense::Eq => "L=",
                Sense::Ge => "L+",
            };
            groups.push((dom, vec![r.terms.clone()], vec![-r.rhs]));
        }
        for (j, var) in m.variables().iter().enumerate() {
            if var.lower == var.upper {
                groups.push(("L=", vec![vec![(VarId(j), 1.0)]], vec![-var.lower]));
                continue;
            }
            if var.lower.is_finite() {
                groups.push(("L+", vec![vec![(VarId(j), 1.0)]], vec![-var.lower]));
            }
            if var.upper.is_finite() {
                groups.push(("L-", vec![vec![(VarId(j), 1.0)]], vec![-var.upper]));
            }
        }
        for c in m.cones() {
            groups.push((
                "QR",
                vec![vec![(c.y, 1.0)], vec![], vec![(c.x, 1.0)]],
                vec![0.0, 0.5, 0.0],
            ));
        }

        writeln!(out, "VER\n3\n")?;
        writeln!(out, "OBJSENSE\nMIN\n")?;
        writeln!(
            out,
            "VAR\n{} 1\nF {}\n",
            m.variables().len(),
            m.variables().len()
        )?;
        let ints = m.binaries();
        if !ints.is_empty() {
            writeln!(out, "INT\n{}", ints.len())?;
            for v in &ints {
                writeln!(out, "{}", v.0)?;
            }
            writeln!(out)?;
        }
        let scalar_rows: usize = groups.iter().map(|g| g.1.len()).sum();
        writeln!(out, "CON\n{} {}", scalar_rows, groups.len())?;
        for (dom, rows, _) in &groups {
            writeln!(out, "{dom} {}", rows.len())?;
        }
        writeln!(out)?;
        if !m.objective().is_empty() {
            writeln!(out, "OBJACOORD\n{}", m.objective().len())?;
            for &(v, c) in m.objective() {
                writeln!(out, "{} {}", v.0, num(c))?;
            }
            writeln!(out)?;
        }
        if m.objective_constant() != 0.0 {
            writeln!(out, "OBJBCOORD\n{}\n", num(m.objective_constant()))?;
        }
        let mut acoord = Vec::new();
        let mut bcoord = Vec::new();
        let mut i = 0usize;
        for (_, rows, consts) in &groups {
            for (terms, &b) in rows.iter().zip(consts) {
                for &(v, a) in terms {
                    acoord.push((i, v.0, a));
                }
                if b != 0.0 {
                    bcoord.push((i, b));
                }
                i += 1;
            }
        }
        if !acoord.is_empty() {
            writeln!(out, "ACOORD\n{}", acoord.len())?;
            for (i, j, a) in acoord {
                writeln!(out, "{i} {j} {}", num(a))?;
            }
            writeln!(out)?;
        }
        if !bcoord.is_empty() {
            writeln!(out, "BCOORD\n{}", bcoord.len())?;
            for (i, b) in bcoord {
                writeln!(out, "{i} {}", num(b))?;
            }
        }
        Ok(())
    }
}

/// Loss-free json dump, schema `ogf-model/1`.
pub struct JsonExporter;

impl ModelExporter for JsonExporter {
    fn name(&self) -> &'static str {
        "model-json"
    }

    fn write(&self, m: &OptModel, out: &mut dyn Write) -> Result<(), ModelError> {
        if !m.is_frozen() {
            return Err(ModelError::NotFrozen);
        }
        serde_json::to_writer_pretty(&mut *out, &ModelDoc::from_model(m))?;
        writeln!(out)?;
        Ok(())
    }
}

pub fn to_json(m: &OptModel) -> Result<String, ModelError> {
    let bytes = export(m, "model-json")?;
    Ok(String::from_utf8(bytes).expect("json is utf-8"))
}

/// Rebuilds a frozen model from its json dump.
pub fn from_json(text: &str) -> Result<OptModel, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text)?;
    doc.into_model()
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    schema: String,
    name: String,
    #[serde(default)]
    meta: BTreeMap<String, String>,
    variables: Vec<VarDoc>,
    rows: Vec<RowDoc>,
    #[serde(default)]
    cones: Vec<ConeDoc>,
    #[serde(default)]
    nonlinear: Vec<NonlinearDoc>,
    #[serde(default)]
    hull_blocks: Vec<HullDoc>,
    objective: ObjectiveDoc,
}

#[derive(Serialize, Deserialize)]
struct VarDoc {
    name: String,
    lower: Option<f64>,
    upper: Option<f64>,
    kind: VarKind,
    #[serde(default)]
    tag: String,
}

#[derive(Serialize, Deserialize)]
struct RowDoc {
    name: String,
    terms: Vec<(String, f64)>,
    sense: Sense,
    rhs: f64,
    tag: String,
}

#[derive(Serialize, Deserialize)]
struct ConeDoc {
    name: String,
    y: String,
    x: String,
    tag: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum ExprDoc {
    Potential {
        potential: String,
        pressure: String,
        b1: f64,
        b2: f64,
    },
    PotentialDrop {
        upstream: String,
        downstream: String,
        flow: String,
        coefficient: f64,
    },
    SignedSquare {
        lifted: String,
        flow: String,
    },
}

#[derive(Serialize, Deserialize)]
struct NonlinearDoc {
    name: String,
    expr: ExprDoc,
    tag: String,
}

#[derive(Serialize, Deserialize)]
struct HullDoc {
    x: String,
    y: String,
    lambdas: Vec<String>,
    vertices: Vec<(f64, f64)>,
    tag: String,
}

#[derive(Serialize, Deserialize)]
struct ObjectiveDoc {
    sense: String,
    constant: f64,
    terms: Vec<(String, f64)>,
}

impl ModelDoc {
    fn from_model(m: &OptModel) -> Self {
        let nm = |v: VarId| m.variable(v).name.clone();
        let bound = |x: f64| x.is_finite().then_some(x);
        Self {
            schema: MODEL_SCHEMA.into(),
            name: m.name.clone(),
            meta: m.meta().clone(),
            variables: m
                .variables()
                .iter()
                .map(|v| VarDoc {
                    name: v.name.clone(),
                    lower: bound(v.lower),
                    upper: bound(v.upper),
                    kind: v.kind,
                    tag: v.tag.clone(),
                })
                .collect(),
            rows: m
                .rows()
                .iter()
                .map(|r| RowDoc {
                    name: r.name.clone(),
                    terms: r.terms.iter().map(|&(v, a)| (nm(v), a)).collect(),
                    sense: r.sense,
                    rhs: r.rhs,
                    tag: r.tag.clone(),
                })
                .collect(),
            cones: m
                .cones()
                .iter()
                .map(|c| ConeDoc {
                    name: c.name.clone(),
                    y: nm(c.y),
                    x: nm(c.x),
                    tag: c.tag.clone(),
                })
                .collect(),
            nonlinear: m
                .nonlinear_rows()
                .iter()
                .map(|n| NonlinearDoc {
                    name: n.name.clone(),
                    tag: n.tag.clone(),
                    expr: match n.expr {
                        NonlinearExpr::Potential {
                            potential,
                            pressure,
                            b1,
                            b2,
                        } => ExprDoc::Potential {
                            potential: nm(potential),
                            pressure: nm(pressure),
                            b1,
                            b2,
                        },
                        NonlinearExpr::PotentialDrop {
                            upstream,
                            downstream,
                            flow,
                            coefficient,
                        } => ExprDoc::PotentialDrop {
                            upstream: nm(upstream),
                            downstream: nm(downstream),
                            flow: nm(flow),
                            coefficient,
                        },
                        NonlinearExpr::SignedSquare { lifted, flow } => ExprDoc::SignedSquare {
                            lifted: nm(lifted),
                            flow: nm(flow),
                        },
                    },
                })
                .collect(),
            hull_blocks: m
                .hull_blocks()
                .iter()
                .map(|h| HullDoc {
                    x: nm(h.x),
                    y: nm(h.y),
                    lambdas: h.lambdas.iter().map(|&l| nm(l)).collect(),
                    vertices: h.vertices.clone(),
                    tag: h.tag.clone(),
                })
                .collect(),
            objective: ObjectiveDoc {
                sense: "minimize".into(),
                constant: m.objective_constant(),
                terms: m.objective().iter().map(|&(v, c)| (nm(v), c)).collect(),
            },
        }
    }

    fn into_model(self) -> Result<OptModel, ModelError> {
        if self.schema != MODEL_SCHEMA {
            return Err(ModelError::Unsupported {
                format: "model-json",
                what: format!("schema `{}`", self.schema),
            });
        }
        if self.objective.sense != "minimize" {
            return Err(ModelError::Unsupported {
                format: "model-json",
                what: format!("objective sense `{}`", self.objective.sense),
            });
        }
        let mut m = OptModel::new(self.name);
        for (k, v) in self.meta {
            m.set_meta(k, v);
        }
        for v in self.variables {
            m.add_var(
                v.name,
                v.lower.unwrap_or(f64::NEG_INFINITY),
                v.upper.unwrap_or(f64::INFINITY),
                v.kind,
                v.tag,
            )?;
        }
        for r in self.rows {
            let terms: Vec<(&str, f64)> = r.terms.iter().map(|(n, a)| (n.as_str(), *a)).collect();
            m.add_row_by_name(r.name, &terms, r.sense, r.rhs, r.tag)?;
        }
        for c in self.cones {
            let (y, x) = (m.var(&c.y)?, m.var(&c.x)?);
            m.add_cone(c.name, y, x, c.tag)?;
        }
        for n in self.nonlinear {
            let expr = match n.expr {
                ExprDoc::Potential {
                    potential,
                    pressure,
                    b1,
                    b2,
                } => NonlinearExpr::Potential {
                    potential: m.var(&potential)?,
                    pressure: m.var(&pressure)?,
                    b1,
                    b2,
                },
                ExprDoc::PotentialDrop {
                    upstream,
                    downstream,
                    flow,
                    coefficient,
                } => NonlinearExpr::PotentialDrop {
                    upstream: m.var(&upstream)?,
                    downstream: m.var(&downstream)?,
                    flow: m.var(&flow)?,
                    coefficient,
                },
                ExprDoc::SignedSquare { lifted, flow } => NonlinearExpr::SignedSquare {
                    lifted: m.var(&lifted)?,
                    flow: m.var(&flow)?,
                },
            };
            m.add_nonlinear(n.name, expr, n.tag)?;
        }
        for h in self.hull_blocks {
            let lambdas = h
                .lambdas
                .iter()
                .map(|l| m.var(l))
                .collect::<Result<Vec<_>, _>>()?;
            let block = HullBlock {
                x: m.var(&h.x)?,
                y: m.var(&h.y)?,
                lambdas,
                vertices: h.vertices,
                tag: h.tag,
            };
            m.add_hull_block(block)?;
        }
        for (name, c) in &self.objective.terms {
            let v = m.var(name)?;
            m.add_objective_term(v, *c)?;
        }
        m.set_objective_constant(self.objective.constant)?;
        Ok(m.freeze())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> OptModel {
        let mut m = OptModel::new("tiny");
        let x = m.add_continuous("x", 0.0, 4.0, "").unwrap();
        m.add_row("c1", &[(x, 1.0)], Sense::Ge, 3.0, "lower")
            .unwrap();
        m.add_objective_term(x, 1.0).unwrap();
        m.freeze()
    }

    #[test]
    fn export_requires_frozen() {
        let m = OptModel::new("t");
        assert!(matches!(export(&m, "mps"), Err(ModelError::NotFrozen)));
    }

    #[test]
    fn mps_rejects_cones() {
        let mut m = OptModel::new("t");
        let x = m.add_continuous("x", -1.0, 1.0, "").unwrap();
        let y = m.add_continuous("y", 0.0, 1.0, "").unwrap();
        m.add_cone("k", y, x, "cone").unwrap();
        let m = m.freeze();
        assert!(matches!(
            export(&m, "mps"),
            Err(ModelError::Unsupported { format: "mps", .. })
        ));
        let cbf = String::from_utf8(export(&m, "cbf").unwrap()).unwrap();
        assert!(cbf.contains("QR 3"));
    }

    #[test]
    fn mps_markers_and_sanitized_names() {
        let mut m = OptModel::new("a b");
        let x = m.add_continuous("x 1", f64::NEG_INFINITY, 2.0, "").unwrap();
        let b = m.add_binary("b", "").unwrap();
        m.add_row("r 1", &[(x, 1.0), (b, -1.0)], Sense::Le, 0.0, "")
            .unwrap();
        let text = String::from_utf8(export(&m.freeze(), "mps").unwrap()).unwrap();
        assert!(text.starts_with("NAME a_b\n"));
        assert!(text.contains(" MI bnd x_1\n UP bnd x_1 2.0000000000000000e0\n"));
        assert!(text
            .contains("'INTORG'\n    b r_1 -1.0000000000000000e0\n    MARKER 'MARKER' 'INTEND'"));
        assert!(text.contains(" BV bnd b\n"));
    }

    #[test]
    fn unknown_format() {
        assert!(matches!(
            export(&tiny(), "lp"),
            Err(ModelError::UnknownFormat(_))
        ));
    }

    #[test]
    fn json_round_trip_with_infinite_bounds() {
        let mut m = OptModel::new("t");
        let x = m
            .add_continuous("x", f64::NEG_INFINITY, f64::INFINITY, "free")
            .unwrap();
        let y = m.add_continuous("y", 0.1, 0.7, "").unwrap();
        m.add_nonlinear(
            "pot",
            NonlinearExpr::Potential {
                potential: y,
                pressure: x,
                b1: 1.0 / 3.0,
                b2: 1e-17,
            },
            "node/potential",
        )
        .unwrap();
        m.add_objective_term(y, 0.1 + 0.2).unwrap();
        m.set_meta("relaxation", "minlp");
        let m = m.freeze();
        let text = to_json(&m).unwrap();
        assert!(text.contains("\"lower\": null"));
        let back = from_json(&text).unwrap();
        assert_eq!(to_json(&back).unwrap(), text);
        assert_eq!(back.variables(), m.variables());
        assert_eq!(back.nonlinear_rows(), m.nonlinear_rows());
    }
}
