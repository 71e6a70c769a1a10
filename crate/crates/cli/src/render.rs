//! Command implementations over a parsed problem file, producing one JSON
//! value per command; the text format is a deterministic rendering of the
//! same value.

use serde_json::{json, Value};
use specsite::site::{build_site, check_descent, spectral_presheaf, SiteOptions};
use specsite::{
    cech_complex, cohomology, comparison_map, constant_presheaf, decide_joint_diagonalizable,
    fts_presheaf, global_sections, joint_diagonalize, k0_presheaf, pi0_grothendieck,
    poset_complex, CochainComplex, ComplexMatrix, ContextPoset, Cover, Error, IntMat,
    MonodromyVerdict,
};

use crate::problem::{Options, ProblemFile};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InconsistentCriteria(msg) => CliError::Internal(msg),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub struct Runner {
    file: ProblemFile,
    options: Options,
    matrices: Vec<ComplexMatrix>,
    site: ContextPoset,
    poset_method: bool,
    cover_selector: String,
    pair: Option<(String, String)>,
    presheaf_choice: String,
}

impl Runner {
    pub fn build(
        file: ProblemFile,
        options: Options,
        poset_method: bool,
        cover_selector: String,
        pair: Option<(String, String)>,
        presheaf_choice: String,
    ) -> Result<Runner, String> {
        let matrices = file.matrices()?;
        let site_options = SiteOptions {
            tol: options.site_tol,
            full_subcontexts: options.full_subcontexts,
        };
        let site = build_site(file.dim, &matrices, site_options)
            .map_err(|e| format!("building the context poset: {e}"))?;
        Ok(Runner {
            file,
            options,
            matrices,
            site,
            poset_method,
            cover_selector,
            pair,
            presheaf_choice,
        })
    }

    pub fn with_provenance(&self, mut value: Value) -> Value {
        let prov = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.options.seed,
            "tol": self.options.tol,
            "site_tol": self.options.site_tol,
        });
        if let Value::Object(map) = &mut value {
            map.insert("provenance".into(), prov);
        }
        value
    }

    fn names(&self) -> Vec<&str> {
        self.file.operators.iter().map(|o| o.name.as_str()).collect()
    }

    fn resolve_cover(&self) -> Result<Cover, CliError> {
        let site = &self.site;
        let maximal = (0..site.len())
            .filter(|&c| (0..site.len()).all(|d| !site.lt(c, d)))
            .max_by_key(|&c| site.contexts[c].num_blocks())
            .expect("nonempty site");
        match self.cover_selector.as_str() {
            "identity" => Ok(Cover { target: maximal, members: vec![maximal] }),
            "auto" => {
                let covers = site.covers_of(maximal);
                Ok(covers
                    .iter()
                    .find(|c| c.members != vec![maximal])
                    .cloned()
                    .unwrap_or_else(|| covers[0].clone()))
            }
            list => {
                let members: Vec<usize> = list
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| {
                        CliError::Input(format!("bad cover selector '{list}'"))
                    })?;
                if members.iter().any(|&m| m >= site.len()) {
                    return Err(CliError::Input(format!(
                        "cover selector '{list}' references a context out of range"
                    )));
                }
                let target = (0..site.len())
                    .filter(|&c| members.iter().all(|&m| site.leq(m, c)))
                    .min_by_key(|&c| site.contexts[c].num_blocks())
                    .ok_or_else(|| {
                        CliError::Input(format!(
                            "no context contains all of the cover members '{list}'"
                        ))
                    })?;
                Ok(Cover { target, members })
            }
        }
    }

    pub fn contexts(&self) -> Result<Value, CliError> {
        let site = &self.site;
        let contexts: Vec<Value> = (0..site.len())
            .map(|c| {
                json!({
                    "id": c,
                    "blocks": site.contexts[c].block_dims(),
                    "masa": site.contexts[c].is_masa(),
                    "trivial": site.contexts[c].is_trivial(),
                })
            })
            .collect();
        let hasse: Vec<Value> = site.hasse_edges().iter().map(|&(a, b)| json!([a, b])).collect();
        let covers: Vec<Value> = (0..site.len())
            .flat_map(|c| site.covers_of(c))
            .map(|cov| json!({"target": cov.target, "members": cov.members}))
            .collect();
        Ok(json!({
            "dim": self.file.dim,
            "num_contexts": site.len(),
            "contexts": contexts,
            "hasse_edges": hasse,
            "covers": covers,
        }))
    }

    pub fn diagonalize(&self) -> Result<Value, CliError> {
        match joint_diagonalize(&self.matrices, self.options.tol) {
            Ok(jd) => {
                let mut labels = serde_json::Map::new();
                let mut residuals = serde_json::Map::new();
                let mut max_residual = 0.0f64;
                for (k, name) in self.names().iter().enumerate() {
                    labels.insert(
                        (*name).into(),
                        Value::Array(jd.labels[k].iter().map(|l| complex_value(*l)).collect()),
                    );
                    let u = jd.unitary.inner();
                    let d = ComplexMatrix::diagonal(&jd.labels[k]);
                    let r = (u.adjoint() * self.matrices[k].inner() * u - d.inner()).norm();
                    max_residual = max_residual.max(r);
                    residuals.insert((*name).into(), json!(r));
                }
                Ok(json!({
                    "diagonalizable": true,
                    "unitary": matrix_value(&jd.unitary),
                    "labels": labels,
                    "residuals": residuals,
                    "max_residual": max_residual,
                }))
            }
            Err(Error::NotCommuting(i, j)) => {
                let names = self.names();
                let comm =
                    specsite::matrix::commutator(&self.matrices[i], &self.matrices[j])?;
                Ok(json!({
                    "diagonalizable": false,
                    "noncommuting_pair": [names[i], names[j]],
                    "commutator_norm": comm.fro_norm(),
                }))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn obstruction(&self) -> Result<Value, CliError> {
        let (tn, sn) = self.pair.as_ref().expect("obstruction takes two names");
        self.obstruction_for(tn, sn)
    }

    fn obstruction_for(&self, tn: &str, sn: &str) -> Result<Value, CliError> {
        let t = self.file.operator(tn).map_err(CliError::Input)?;
        let s = self.file.operator(sn).map_err(CliError::Input)?;
        let r = decide_joint_diagonalizable(&self.site, &t, &s, self.options.tol)?;
        let comm = specsite::matrix::commutator(&t, &s)?;
        let presheaf = fts_presheaf(&self.site, &t, &s);
        let sections: Vec<Value> = presheaf
            .sections
            .iter()
            .enumerate()
            .map(|(c, secs)| json!({"context": c, "markings": secs.len()}))
            .collect();
        let monodromy = match &r.monodromy {
            MonodromyVerdict::Vacuous => "vacuous",
            MonodromyVerdict::Trivial { .. } => "trivial",
            MonodromyVerdict::Obstructed { .. } => "obstructed",
        };
        let witness = r.h0_witness.as_ref().map(|(c, m)| {
            json!({
                "context": c,
                "order": m.order,
                "labels": m.labels.iter()
                    .map(|&(l, u)| json!([complex_value(l), complex_value(u)]))
                    .collect::<Vec<_>>(),
            })
        });
        Ok(json!({
            "operators": [tn, sn],
            "verdict": if r.diagonalizable { "diagonalizable" } else { "obstructed" },
            "criteria": {
                "commutator_vanishes": r.commutator_vanishes,
                "joint_context_exists": r.joint_context.is_some(),
                "h0_nonempty": r.h0_witness.is_some(),
                "monodromy": monodromy,
            },
            "commutator": matrix_value(&comm),
            "commutator_norm": r.commutator_norm,
            "joint_context": r.joint_context,
            "h0_witness": witness,
            "unitary": r.unitary.as_ref().map(|jd| matrix_value(&jd.unitary)),
            "sections": sections,
        }))
    }

    fn chosen_presheaf(&self) -> Result<specsite::IntPresheaf, CliError> {
        match self.presheaf_choice.as_str() {
            "" | "k0" => Ok(k0_presheaf(&self.site)),
            "constant" => Ok(constant_presheaf(&self.site, 1)),
            other => Err(CliError::Input(format!(
                "unknown presheaf '{other}' (expected 'k0' or 'constant')"
            ))),
        }
    }

    pub fn cohomology(&self) -> Result<Value, CliError> {
        let p = self.chosen_presheaf()?;
        let (complex, cover_info): (CochainComplex, Value) = if self.poset_method {
            (poset_complex(&self.site, &p), Value::Null)
        } else {
            let cover = self.resolve_cover()?;
            let complex = cech_complex(&self.site, &p, &cover)?;
            (complex, json!({"target": cover.target, "members": cover.members}))
        };
        let groups = cohomology(&complex);
        let rendered: Vec<Value> = groups
            .iter()
            .enumerate()
            .map(|(n, g)| {
                json!({
                    "degree": n,
                    "group": g.group.to_string(),
                    "representatives": g.representatives.iter()
                        .map(|r| bigint_vec_value(r))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        Ok(json!({
            "method": if self.poset_method { "poset" } else { "cech" },
            "presheaf": if self.presheaf_choice.is_empty() { "k0" } else { self.presheaf_choice.as_str() },
            "cover": cover_info,
            "cochain_ranks": complex.ranks,
            "cohomology": rendered,
        }))
    }

    pub fn ktheory(&self) -> Result<Value, CliError> {
        let p = k0_presheaf(&self.site);
        let restrictions: Vec<Value> = p
            .restrictions
            .iter()
            .map(|(&(small, large), m)| {
                json!({"small": small, "large": large, "matrix": intmat_value(m)})
            })
            .collect();
        let (group, basis) = global_sections(&self.site, &p);
        let comparison = match comparison_map(&self.site, &p, &self.matrices) {
            Ok(report) => json!({
                "global_rank": report.global_rank,
                "bottom_values": bigint_vec_value(&report.bottom_values),
                "kernel": report.kernel.to_string(),
                "cokernel": report.cokernel.to_string(),
                "surjective": report.surjective,
            }),
            Err(Error::ReducibleAmbient(d)) => {
                json!({"note": format!("ambient algebra reducible (commutant dimension {d}); comparison map not defined")})
            }
            Err(e) => return Err(e.into()),
        };
        Ok(json!({
            "ranks": p.ranks,
            "restrictions": restrictions,
            "global_sections": {
                "group": group.to_string(),
                "basis": basis.iter().map(|b| bigint_vec_value(b)).collect::<Vec<_>>(),
            },
            "comparison": comparison,
        }))
    }

    pub fn pi0(&self) -> Result<Value, CliError> {
        let spectral = pi0_grothendieck(&spectral_presheaf(&self.site));
        let mut out = json!({
            "spectral": {
                "components": spectral.components,
                "representatives": spectral.representatives,
            },
        });
        if self.matrices.len() == 2 {
            let marked = pi0_grothendieck(&fts_presheaf(
                &self.site,
                &self.matrices[0],
                &self.matrices[1],
            ));
            out["marked"] = json!({
                "components": marked.components,
                "representatives": marked.representatives,
            });
        }
        Ok(out)
    }

    pub fn report(&self) -> Result<Value, CliError> {
        let mut out = serde_json::Map::new();
        let mut stage = |name: &str, result: Result<Value, CliError>| -> Result<(), CliError> {
            match result {
                Ok(v) => {
                    out.insert(name.into(), v);
                    Ok(())
                }
                // internal inconsistencies abort; input-level stage failures
                // are recorded and later stages still run
                Err(CliError::Internal(m)) => Err(CliError::Internal(m)),
                Err(CliError::Input(m)) => {
                    out.insert(name.into(), json!({"error": m}));
                    Ok(())
                }
            }
        };
        stage("contexts", self.contexts())?;
        stage("diagonalize", self.diagonalize())?;
        stage("descent", self.descent())?;
        stage("cohomology", self.cohomology())?;
        stage("ktheory", self.ktheory())?;
        let names = self.names();
        let (tn, sn) = match names.len() {
            0 => (None, None),
            1 => (Some(names[0]), Some(names[0])),
            _ => (Some(names[0]), Some(names[1])),
        };
        if let (Some(tn), Some(sn)) = (tn, sn) {
            stage("obstruction", self.obstruction_for(tn, sn))?;
        }
        stage("pi0", self.pi0())?;
        Ok(Value::Object(out))
    }

    fn descent(&self) -> Result<Value, CliError> {
        let cover = self.resolve_cover()?;
        let presheaf = spectral_presheaf(&self.site);
        let report = check_descent(&self.site, &cover, &presheaf);
        Ok(json!({
            "cover": {"target": cover.target, "members": cover.members},
            "compatible_families": report.compatible.len(),
            "image_families": report.image.len(),
            "injective": report.injective,
            "surjective": report.surjective,
            "holds": report.holds,
        }))
    }
}

fn round12(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn complex_value(c: specsite::C64) -> Value {
    json!([round12(c.re), round12(c.im)])
}

fn matrix_value(m: &ComplexMatrix) -> Value {
    let n = m.dim();
    Value::Array(
        (0..n)
            .map(|i| Value::Array((0..n).map(|j| complex_value(m.get(i, j))).collect()))
            .collect(),
    )
}

fn intmat_value(m: &IntMat) -> Value {
    Value::Array(
        (0..m.rows)
            .map(|i| {
                Value::Array((0..m.cols).map(|j| json!(m[(i, j)].to_string())).collect())
            })
            .collect(),
    )
}

fn bigint_vec_value(v: &[num_bigint::BigInt]) -> Value {
    Value::Array(v.iter().map(|x| json!(x.to_string())).collect())
}

pub fn to_text(value: &Value, indent: usize) -> String {
    let pad = "  ".repeat(indent);
    match value {
        Value::Object(map) => {
            let mut out = String::new();
            for (k, v) in map {
                match v {
                    Value::Object(_) | Value::Array(_) if !is_inline(v) => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        out.push_str(&to_text(v, indent + 1));
                    }
                    _ => out.push_str(&format!("{pad}{k}: {}\n", inline(v))),
                }
            }
            out
        }
        Value::Array(items) => {
            let mut out = String::new();
            for item in items {
                if is_inline(item) {
                    out.push_str(&format!("{pad}- {}\n", inline(item)));
                } else {
                    out.push_str(&format!("{pad}-\n"));
                    out.push_str(&to_text(item, indent + 1));
                }
            }
            out
        }
        other => format!("{pad}{}\n", inline(other)),
    }
}

fn is_inline(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.iter().all(|i| i.is_number() || i.is_string() || i.is_boolean() || is_inline_small(i)),
        Value::Object(_) => false,
        _ => true,
    }
}

fn is_inline_small(v: &Value) -> bool {
    matches!(v, Value::Array(items) if items.len() <= 4 && items.iter().all(|i| i.is_number()))
}

fn inline(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => {
            format!("[{}]", items.iter().map(inline).collect::<Vec<_>>().join(", "))
        }
        other => other.to_string(),
    }
}
