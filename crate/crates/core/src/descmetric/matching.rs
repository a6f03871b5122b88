/// Maximum-cardinality matching of rows to columns over `true` entries,
/// via augmenting paths. Returned pairs are sorted by row.
pub fn maximum_matching(adj: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let cols = adj.iter().map(Vec::len).max().unwrap_or(0);
    let mut owner: Vec<Option<usize>> = vec![None; cols];
    for row in 0..adj.len() {
        let mut seen = vec![false; cols];
        augment(adj, row, &mut seen, &mut owner);
    }
    let mut pairs: Vec<(usize, usize)> = owner
        .iter()
        .enumerate()
        .filter_map(|(col, r)| r.map(|r| (r, col)))
        .collect();
    pairs.sort_unstable();
    pairs
}

fn augment(adj: &[Vec<bool>], row: usize, seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
    for (col, &edge) in adj[row].iter().enumerate() {
        if !edge || seen[col] {
            continue;
        }
        seen[col] = true;
        let free = match owner[col] {
            None => true,
            Some(other) => augment(adj, other, seen, owner),
        };
        if free {
            owner[col] = Some(row);
            return true;
        }
    }
    false
}

/// Row-order greedy matching: each row takes its first unused column.
pub fn greedy_matching(adj: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let cols = adj.iter().map(Vec::len).max().unwrap_or(0);
    let mut used = vec![false; cols];
    let mut pairs = Vec::new();
    for (row, edges) in adj.iter().enumerate() {
        if let Some(col) = (0..edges.len()).find(|&c| edges[c] && !used[c]) {
            used[col] = true;
            pairs.push((row, col));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adj(rows: &[&str]) -> Vec<Vec<bool>> {
        rows.iter().map(|r| r.chars().map(|c| c == '1').collect()).collect()
    }

    #[test]
    fn diagonal() {
        assert_eq!(maximum_matching(&adj(&["100", "010"])), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn cross_match_needs_augmenting() {
        let a = adj(&["11", "10"]);
        assert_eq!(maximum_matching(&a), vec![(0, 1), (1, 0)]);
        assert_eq!(greedy_matching(&a), vec![(0, 0)]);
    }

    #[test]
    fn empty_inputs() {
        assert!(maximum_matching(&[]).is_empty());
        assert!(maximum_matching(&adj(&["", ""])).is_empty());
        assert!(maximum_matching(&adj(&["000", "000"])).is_empty());
    }
}
