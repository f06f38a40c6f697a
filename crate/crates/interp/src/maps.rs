use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use cascade_core::Layout;
use cascade_model::{ModelConfig, NodeId, Site};

use crate::ablation::UsefulNodes;
use crate::error::Result;
use crate::tagging::SubtaskTag;

const CELL_W: usize = 64;
const CELL_H: usize = 22;
const LABEL_W: usize = 64;

/// Positions by (layer, head-or-MLP) grid of text cells; `None` is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    pub cells: Vec<Vec<Option<String>>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl Grid {
    fn empty(name: &str, cfg: &ModelConfig) -> Self {
        let t = Layout::new(cfg.n_digits).seq_len() - 1;
        let layout = Layout::new(cfg.n_digits);
        let columns = (0..t)
            .map(|p| match layout.role(p) {
                Some(r) => format!("P{p}:{r}"),
                None => format!("P{p}"),
            })
            .collect();
        let mut rows = Vec::new();
        for l in 0..cfg.n_layers {
            rows.extend((0..cfg.n_heads).map(|h| format!("L{l}H{h}")));
            rows.push(format!("L{l}MLP"));
        }
        let cells = vec![vec![None; t]; rows.len()];
        Grid {
            name: name.to_string(),
            columns,
            rows,
            cells,
        }
    }

    fn row_of(cfg: &ModelConfig, node: NodeId) -> usize {
        let per_layer = cfg.n_heads + 1;
        node.layer * per_layer
            + match node.site {
                Site::Head(h) => h,
                Site::Mlp => cfg.n_heads,
            }
    }

    fn set(&mut self, cfg: &ModelConfig, node: NodeId, text: String) {
        let r = Self::row_of(cfg, node);
        if let Some(cell) = self
            .cells
            .get_mut(r)
            .and_then(|row| row.get_mut(node.position))
        {
            *cell = Some(text);
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&str> {
        self.cells[row][col].as_deref()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        for c in &self.columns {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (name, row) in self.rows.iter().zip(&self.cells) {
            out.push_str(name);
            for cell in row {
                out.push(',');
                out.push_str(&csv_field(cell.as_deref().unwrap_or("")));
            }
            out.push('\n');
        }
        out
    }

    /// SVG with one rectangle per cell; unused cells are grey filler.
    pub fn to_svg(&self) -> String {
        let w = LABEL_W + CELL_W * self.columns.len();
        let h = CELL_H * (self.rows.len() + 2);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="monospace" font-size="10">"#
        );
        let _ = writeln!(s, r#"<text x="4" y="14">{}</text>"#, escape(&self.name));
        for (j, c) in self.columns.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text class="col" x="{}" y="{}">{}</text>"#,
                LABEL_W + j * CELL_W + 2,
                2 * CELL_H - 6,
                escape(c)
            );
        }
        for (i, (name, row)) in self.rows.iter().zip(&self.cells).enumerate() {
            let y = (i + 2) * CELL_H;
            let _ = writeln!(
                s,
                r#"<text class="row" x="2" y="{}">{}</text>"#,
                y + CELL_H - 6,
                escape(name)
            );
            for (j, cell) in row.iter().enumerate() {
                let x = LABEL_W + j * CELL_W;
                let fill = if cell.is_some() { "#ffffff" } else { "#d0d0d0" };
                let _ = writeln!(
                    s,
                    r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" stroke="#808080"/>"##
                );
                if let Some(text) = cell {
                    let _ = writeln!(
                        s,
                        r#"<text class="cell" data-row="{i}" data-col="{j}" x="{}" y="{}">{}</text>"#,
                        x + 2,
                        y + CELL_H - 6,
                        escape(text)
                    );
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.csv", self.name)), self.to_csv())?;
        std::fs::write(dir.join(format!("{}.svg", self.name)), self.to_svg())?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn useful_union(useful: &BTreeMap<String, UsefulNodes>) -> BTreeSet<NodeId> {
    useful.values().flat_map(|u| u.useful()).collect()
}

/// Subtask labels, fail percentages, minimum complexity quanta and impacted
/// answer digits. `useful` is keyed by a short class label such as "S".
pub fn render_maps(
    cfg: &ModelConfig,
    tags: &[SubtaskTag],
    useful: &BTreeMap<String, UsefulNodes>,
) -> Vec<Grid> {
    let mut subtasks = Grid::empty("subtasks", cfg);
    let mut labels: BTreeMap<NodeId, BTreeSet<String>> = BTreeMap::new();
    for t in tags {
        for n in t.nodes() {
            labels.entry(n).or_default().insert(t.subtask().to_string());
        }
    }
    for n in useful_union(useful) {
        labels.entry(n).or_default();
    }
    for (n, l) in labels {
        let text = if l.is_empty() {
            "used".to_string()
        } else {
            l.into_iter().collect::<Vec<_>>().join(" ")
        };
        subtasks.set(cfg, n, text);
    }

    let mut fails = Grid::empty("fail_pct", cfg);
    let mut complexity = Grid::empty("complexity", cfg);
    let mut impacts = Grid::empty("impacts", cfg);
    for n in useful_union(useful) {
        let mut f = Vec::new();
        let mut q = Vec::new();
        let mut imp = BTreeSet::new();
        for (label, u) in useful {
            if !u.is_useful(n) {
                continue;
            }
            let a = &u.nodes[&n];
            f.push(format!("{label}{:.2}", 100.0 * a.fail_fraction));
            if let Some(m) = a.min_quantum {
                q.push(m.to_string());
            }
            imp.extend(a.impacts.iter().map(|r| r.to_string()));
        }
        fails.set(cfg, n, f.join(" "));
        complexity.set(cfg, n, q.join(" "));
        impacts.set(cfg, n, imp.into_iter().collect::<Vec<_>>().join(" "));
    }
    vec![subtasks, fails, complexity, impacts]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_svg_carry_the_same_cells() {
        let cfg = ModelConfig::new(2, 1, 2, 8, 0);
        let mut g = Grid::empty("t", &cfg);
        g.set(&cfg, NodeId::head(3, 0, 1), "SA0 ST1".into());
        g.set(&cfg, NodeId::mlp(5, 0), "a,b".into());
        let svg = g.to_svg();
        assert_eq!(svg.matches(r##"fill="#d0d0d0""##).count(), 3 * 9 - 2);
        assert!(svg.contains(r#"data-row="1" data-col="3" x="#));
        assert!(g.to_csv().lines().nth(2).unwrap().contains(",SA0 ST1,"));
    }
}
