//! Input parsing: numeric CSV point files and whitespace-separated edge
//! lists with optional `# id name` vertex labels.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is empty")]
    Empty,
    #[error("row {row}, column {col}: `{cell}` is not a number")]
    BadCell { row: usize, col: usize, cell: String },
    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("line {line}: expected `u v`, found `{content}`")]
    BadEdgeLine { line: usize, content: String },
    #[error("line {line}: vertex id {id} out of range for 1-based input")]
    VertexOutOfRange { line: usize, id: usize },
}

type Result<T> = std::result::Result<T, IngestError>;

/// Parses comma-separated numeric rows. A header is detected (and skipped)
/// when any cell of the first row fails to parse as a number. Row and
/// column numbers in errors are 1-based file positions.
pub fn parse_points_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    let mut saw_first = false;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if !saw_first {
            saw_first = true;
            if cells.iter().any(|c| c.parse::<f64>().is_err()) {
                continue;
            }
        }
        if width == 0 {
            width = cells.len();
        } else if cells.len() != width {
            return Err(IngestError::RaggedRow {
                row: idx + 1,
                expected: width,
                found: cells.len(),
            });
        }
        let mut row = Vec::with_capacity(cells.len());
        for (col, cell) in cells.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(x) if x.is_finite() => row.push(x),
                _ => {
                    return Err(IngestError::BadCell {
                        row: idx + 1,
                        col: col + 1,
                        cell: (*cell).to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(rows)
}

/// A parsed edge list: vertex count, deduplicated direction (as given),
/// optional labels, and how many self-loops were dropped.
#[derive(Debug)]
pub struct EdgeList {
    pub vertex_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub labels: Option<Vec<String>>,
    pub self_loops_dropped: usize,
}

/// Parses one `u v` pair per line. Lines starting with `#` are comments;
/// the form `# <id> <name>` attaches a label to a vertex. `one_based`
/// shifts all ids (edge endpoints and label ids) down by one. Self-loops
/// are dropped and counted rather than rejected.
pub fn parse_edge_list(text: &str, one_based: bool) -> Result<EdgeList> {
    let mut edges = Vec::new();
    let mut labeled: Vec<(usize, String)> = Vec::new();
    let mut max_id = 0usize;
    let mut any = false;
    let mut self_loops = 0usize;

    let adjust = |raw: usize, line: usize| -> Result<usize> {
        if one_based {
            if raw == 0 {
                return Err(IngestError::VertexOutOfRange { line, id: raw });
            }
            Ok(raw - 1)
        } else {
            Ok(raw)
        }
    };

    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            let mut parts = rest.splitn(2, char::is_whitespace);
            if let (Some(first), Some(name)) = (parts.next(), parts.next()) {
                if let Ok(raw) = first.parse::<usize>() {
                    let id = adjust(raw, idx + 1)?;
                    labeled.push((id, name.trim().to_string()));
                    max_id = max_id.max(id);
                    any = true;
                }
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(IngestError::BadEdgeLine { line: idx + 1, content: line.to_string() });
        }
        let mut pair = [0usize; 2];
        for (slot, token) in pair.iter_mut().zip(&tokens) {
            let raw = token.parse::<usize>().map_err(|_| IngestError::BadEdgeLine {
                line: idx + 1,
                content: line.to_string(),
            })?;
            *slot = adjust(raw, idx + 1)?;
        }
        let (u, v) = (pair[0], pair[1]);
        if u == v {
            self_loops += 1;
            continue;
        }
        max_id = max_id.max(u).max(v);
        any = true;
        edges.push((u, v));
    }

    if !any {
        return Err(IngestError::Empty);
    }
    let vertex_count = max_id + 1;
    let labels = if labeled.is_empty() {
        None
    } else {
        let mut names: Vec<String> = (0..vertex_count).map(|i| i.to_string()).collect();
        for (id, name) in labeled {
            names[id] = name;
        }
        Some(names)
    };
    Ok(EdgeList { vertex_count, edges, labels, self_loops_dropped: self_loops })
}
