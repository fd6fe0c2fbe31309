use std::fmt;

use super::Mesh;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A face referenced by more than two cells.
    Simplicity { face: usize, cells: Vec<usize> },
    /// The cells split into several face-connected components.
    Connectedness { component_sizes: Vec<usize> },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return writeln!(f, "mesh is regular");
        }
        for v in &self.violations {
            match v {
                Violation::Simplicity { face, cells } => {
                    writeln!(f, "simplicity: face {face} is shared by cells {cells:?}")?
                }
                Violation::Connectedness { component_sizes } => writeln!(
                    f,
                    "connectedness: {} components with sizes {component_sizes:?}",
                    component_sizes.len()
                )?,
            }
        }
        Ok(())
    }
}

/// Checks simplicity (every face in at most two cells) and connectedness
/// (all cells reachable through shared faces).
pub fn validate_regular(mesh: &Mesh) -> ValidationReport {
    let mut violations = Vec::new();
    for (id, face) in mesh.faces.iter().enumerate() {
        if face.sides.len() > 2 {
            violations.push(Violation::Simplicity {
                face: id,
                cells: face.sides.iter().map(|&(c, _)| c).collect(),
            });
        }
    }

    let n = mesh.num_cells();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for face in &mesh.faces {
        if let Some((&(first, _), rest)) = face.sides.split_first() {
            for &(other, _) in rest {
                let (a, b) = (find(&mut parent, first), find(&mut parent, other));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut sizes = std::collections::BTreeMap::new();
    for c in 0..n {
        *sizes.entry(find(&mut parent, c)).or_insert(0usize) += 1;
    }
    if sizes.len() > 1 {
        violations.push(Violation::Connectedness {
            component_sizes: sizes.into_values().collect(),
        });
    }

    ValidationReport { violations }
}
