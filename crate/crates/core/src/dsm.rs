//! Domain mapping matrices between components and requirements, and the
//! component dependency matrix derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::ComposedSystem;
use crate::predicate::Requirement;
use crate::synthesis::mrps_components;

/// Binary component-by-requirement matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dmm {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub entries: Vec<Vec<u8>>,
}

/// Square component dependency matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dsm {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<u32>>,
}

fn csv<T: ToString>(rows: &[String], cols: &[String], cell: impl Fn(usize, usize) -> T) -> String {
    let mut out = String::new();
    out.push_str(&std::iter::once(String::new()).chain(cols.iter().map(|c| quote(c))).collect::<Vec<_>>().join(","));
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        let mut line = vec![quote(r)];
        line.extend((0..cols.len()).map(|j| cell(i, j).to_string()));
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn quote(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Dmm {
    pub fn to_csv(&self) -> String {
        csv(&self.rows, &self.cols, |i, j| self.entries[i][j])
    }
}

impl Dsm {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_csv(&self) -> String {
        csv(&self.labels, &self.labels, |i, j| self.matrix[i][j])
    }

    pub fn from_matrix(labels: Vec<String>, matrix: Vec<Vec<u32>>) -> Result<Dsm> {
        if matrix.len() != labels.len() || matrix.iter().any(|r| r.len() != labels.len()) {
            return Err(Error::Shape(format!("{} labels for a non-square or mismatched matrix", labels.len())));
        }
        Ok(Dsm { labels, matrix })
    }
}

/// P1 marks the component owning each requirement's event, P2 the
/// components its condition refers to. Rows are the MRPS components of
/// `plant`.
pub fn build_dmms(plant: &ComposedSystem, reqs: &[Requirement]) -> Result<(Dmm, Dmm)> {
    let comps = mrps_components(plant);
    let rows: Vec<String> = comps.iter().map(|c| c.name.clone()).collect();
    let cols: Vec<String> = reqs.iter().map(|r| r.name.clone()).collect();
    let mut p1 = vec![vec![0u8; cols.len()]; rows.len()];
    let mut p2 = vec![vec![0u8; cols.len()]; rows.len()];
    let comp_of = |aut: &str| comps.iter().position(|c| c.automata.iter().any(|a| a == aut));
    for (j, r) in reqs.iter().enumerate() {
        let owner = plant
            .components()
            .iter()
            .find(|a| a.has_event(&r.event))
            .and_then(|a| comp_of(a.name()))
            .ok_or_else(|| Error::ModelReference(format!("requirement `{}` names unknown event `{}`", r.name, r.event)))?;
        p1[owner][j] = 1;
        for a in r.referenced_automata() {
            let i = comp_of(&a)
                .ok_or_else(|| Error::ModelReference(format!("requirement `{}` refers to unknown automaton `{a}`", r.name)))?;
            p2[i][j] = 1;
        }
    }
    Ok((Dmm { rows: rows.clone(), cols: cols.clone(), entries: p1 }, Dmm { rows, cols, entries: p2 }))
}

/// `P = P1 * P2^T`.
pub fn build_dsm(p1: &Dmm, p2: &Dmm) -> Result<Dsm> {
    if p1.rows != p2.rows || p1.cols.len() != p2.cols.len() {
        return Err(Error::Shape(format!(
            "P1 is {}x{}, P2 is {}x{}",
            p1.rows.len(),
            p1.cols.len(),
            p2.rows.len(),
            p2.cols.len()
        )));
    }
    let n = p1.rows.len();
    let mut m = vec![vec![0u32; n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..p1.cols.len()).map(|k| u32::from(p1.entries[i][k] * p2.entries[j][k])).sum();
        }
    }
    Ok(Dsm { labels: p1.rows.clone(), matrix: m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::automaton;

    fn onoff(name: &str) -> crate::Automaton {
        automaton(
            name,
            &[("Off", true), ("On", false)],
            &[(&format!("{name}.c_on"), true), (&format!("{name}.c_off"), true)],
            &[("Off", &format!("{name}.c_on"), "On"), ("On", &format!("{name}.c_off"), "Off")],
        )
        .unwrap()
    }

    #[test]
    fn single_dependency() {
        let sys = ComposedSystem::new(vec![onoff("Pump1"), onoff("Mode"), onoff("X")]).unwrap();
        let r = Requirement::parse("R1", "Pump1.c_on needs not Mode.Off").unwrap();
        let (p1, p2) = build_dmms(&sys, &[r]).unwrap();
        assert_eq!(p1.entries, vec![vec![1], vec![0], vec![0]]);
        assert_eq!(p2.entries, vec![vec![0], vec![1], vec![0]]);
        let d = build_dsm(&p1, &p2).unwrap();
        assert_eq!(d.matrix, vec![vec![0, 1, 0], vec![0, 0, 0], vec![0, 0, 0]]);
        assert!(d.to_csv().starts_with(",Pump1,Mode,X\nPump1,0,1,0\n"));
    }

    #[test]
    fn empty_requirements_and_shape_errors() {
        let sys = ComposedSystem::new(vec![onoff("A")]).unwrap();
        let (p1, p2) = build_dmms(&sys, &[]).unwrap();
        assert_eq!(p1.cols.len(), 0);
        assert_eq!(build_dsm(&p1, &p2).unwrap().matrix, vec![vec![0]]);
        let bad = Dmm { rows: vec!["B".into()], cols: vec![], entries: vec![vec![]] };
        assert!(matches!(build_dsm(&p1, &bad), Err(Error::Shape(_))));
        let r = Requirement::parse("R", "Z.go needs true").unwrap();
        assert!(build_dmms(&sys, &[r]).is_err());
    }

    #[test]
    fn self_dependencies_are_diagonal() {
        let sys = ComposedSystem::new(vec![onoff("A"), onoff("B")]).unwrap();
        let reqs = vec![
            Requirement::parse("Ra", "A.c_on needs A.Off").unwrap(),
            Requirement::parse("Rb", "B.c_on needs B.Off").unwrap(),
        ];
        let (p1, p2) = build_dmms(&sys, &reqs).unwrap();
        assert_eq!(build_dsm(&p1, &p2).unwrap().matrix, vec![vec![1, 0], vec![0, 1]]);
    }
}
