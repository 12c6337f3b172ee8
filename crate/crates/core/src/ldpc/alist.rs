//! alist text format (MacKay).
//!
//! ```text
//! n m
//! max_col_degree max_row_degree
//! <n column degrees>
//! <m row degrees>
//! <n lines: 1-based check indices of each column, zero padded>
//! <m lines: 1-based variable indices of each row, zero padded>
//! ```

use super::ParityCheckMatrix;
use crate::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn load_parity_matrix(text: &str) -> Result<ParityCheckMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut next_numbers = |what: &str| -> Result<(usize, Vec<usize>)> {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(text.lines().count() + 1, format!("missing {what}")))?;
        let nums = l
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| parse_err(ln, format!("bad integer '{t}' in {what}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((ln, nums))
    };

    let (ln, header) = next_numbers("header")?;
    let [n, m] = header[..] else {
        return Err(parse_err(ln, "header must be 'n m'"));
    };
    if m == 0 || m >= n {
        return Err(parse_err(ln, format!("need 0 < m < n, got n = {n}, m = {m}")));
    }
    let (ln, maxes) = next_numbers("max degrees")?;
    let [max_col, max_row] = maxes[..] else {
        return Err(parse_err(ln, "expected 'max_col_degree max_row_degree'"));
    };
    let (ln, col_deg) = next_numbers("column degrees")?;
    if col_deg.len() != n || col_deg.iter().any(|&d| d > max_col) {
        return Err(parse_err(ln, "column degree list inconsistent with header"));
    }
    let (ln, row_deg) = next_numbers("row degrees")?;
    if row_deg.len() != m || row_deg.iter().any(|&d| d > max_row) {
        return Err(parse_err(ln, "row degree list inconsistent with header"));
    }

    let mut read_lists = |count: usize, degrees: &[usize], bound: usize, what: &str| {
        (0..count)
            .map(|i| {
                let (ln, nums) = next_numbers(what)?;
                let mut list = Vec::with_capacity(degrees[i]);
                for &x in nums.iter().filter(|&&x| x != 0) {
                    if x > bound {
                        return Err(parse_err(ln, format!("index {x} out of range 1..={bound}")));
                    }
                    if list.contains(&(x - 1)) {
                        return Err(parse_err(ln, format!("duplicate index {x}")));
                    }
                    list.push(x - 1);
                }
                if list.len() != degrees[i] {
                    return Err(parse_err(
                        ln,
                        format!("{what} {} has {} entries, degree says {}", i + 1, list.len(), degrees[i]),
                    ));
                }
                Ok((ln, list))
            })
            .collect::<Result<Vec<_>>>()
    };
    let cols = read_lists(n, &col_deg, m, "column")?;
    let rows = read_lists(m, &row_deg, n, "row")?;

    // Column lists must describe the same matrix as the row lists.
    for (c, (ln, checks)) in cols.iter().enumerate() {
        for &r in checks {
            if !rows[r].1.contains(&c) {
                return Err(parse_err(
                    *ln,
                    format!("column {} lists row {} but that row omits it", c + 1, r + 1),
                ));
            }
        }
    }

    ParityCheckMatrix::from_rows(n, rows.into_iter().map(|(_, r)| r).collect())
        .map_err(|e| parse_err(0, e.to_string()))
}

/// Serialises `h`, zero-padding adjacency lines to the maximum degree.
pub fn to_alist(h: &ParityCheckMatrix) -> String {
    let col_deg = h.column_degrees();
    let row_deg = h.row_degrees();
    let max_col = col_deg.iter().copied().max().unwrap_or(0);
    let max_row = row_deg.iter().copied().max().unwrap_or(0);
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let padded = |list: &[usize], width: usize| {
        let mut v: Vec<usize> = list.iter().map(|x| x + 1).collect();
        v.resize(width, 0);
        join(&v)
    };

    let mut out = format!("{} {}\n{max_col} {max_row}\n", h.n(), h.m());
    out += &join(&col_deg);
    out.push('\n');
    out += &join(&row_deg);
    out.push('\n');
    for col in h.cols() {
        out += &padded(col, max_col);
        out.push('\n');
    }
    for row in h.rows() {
        out += &padded(row, max_row);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::build_parity_matrix;
    use crate::ldpc::tests::hamming74;

    const HAMMING_ALIST: &str = "7 3
3 4
1 1 2 1 2 2 3
4 4 4
1 0 0
2 0 0
1 2 0
3 0 0
1 3 0
2 3 0
1 2 3
1 3 5 7
2 3 6 7
4 5 6 7
";

    #[test]
    fn parses_hamming() {
        let h = load_parity_matrix(HAMMING_ALIST).unwrap();
        assert_eq!((h.n(), h.k()), (7, 4));
        assert_eq!(h, hamming74());
    }

    #[test]
    fn out_of_range_index_names_line() {
        let bad = HAMMING_ALIST.replace("4 5 6 7", "4 5 6 9");
        match load_parity_matrix(&bad) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 14);
                assert!(msg.contains("out of range"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_header_errors() {
        let dup = HAMMING_ALIST.replace("1 3 5 7", "1 3 3 7");
        assert!(matches!(load_parity_matrix(&dup), Err(Error::Parse { line: 12, .. })));
        assert!(matches!(load_parity_matrix("7\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_parity_matrix("7 x\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn roundtrip_preserves_adjacency() {
        for h in [hamming74(), build_parity_matrix(96, 4).unwrap()] {
            let text = to_alist(&h);
            assert_eq!(load_parity_matrix(&text).unwrap(), h);
        }
    }
}
