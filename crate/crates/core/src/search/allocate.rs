use crate::error::{Error, Result};

/// Splits `chiplets` across clusters in proportion to `loads` by largest
/// remainder. Every cluster gets at least one chiplet; ties go to the lower
/// index.
pub fn proportional_allocate(loads: &[u64], chiplets: usize) -> Result<Vec<usize>> {
    let n = loads.len();
    if n == 0 || n > chiplets {
        return Err(Error::TooManyClusters {
            clusters: n,
            chiplets,
        });
    }
    let total: u128 = loads.iter().map(|&l| l as u128).sum();
    // Exact quotas as fractions numer / total (equal shares when all loads are zero).
    let (numer, denom): (Vec<u128>, u128) = if total == 0 {
        (vec![chiplets as u128; n], n as u128)
    } else {
        (loads.iter().map(|&l| l as u128 * chiplets as u128).collect(), total)
    };
    let floor: Vec<usize> = numer.iter().map(|q| (q / denom) as usize).collect();
    let rem: Vec<u128> = numer.iter().map(|q| q % denom).collect();
    let mut sizes: Vec<usize> = floor.iter().map(|&f| f.max(1)).collect();
    let mut assigned: usize = sizes.iter().sum();

    // Largest remainders first among clusters not already lifted to 1.
    let mut order: Vec<usize> = (0..n).filter(|&i| floor[i] > 0).collect();
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    let mut it = order.iter().cycle();
    while assigned < chiplets {
        let &i = it.next().expect("at least one cluster has a positive quota");
        sizes[i] += 1;
        assigned += 1;
    }

    // Lifting zero quotas to 1 can overshoot; take back from the clusters
    // whose quota is furthest below their size.
    while assigned > chiplets {
        let i = (0..n)
            .filter(|&i| sizes[i] > 1)
            .min_by(|&a, &b| {
                // compare numer/denom - size, smaller first
                let da = numer[a] as i128 - (sizes[a] as u128 * denom) as i128;
                let db = numer[b] as i128 - (sizes[b] as u128 * denom) as i128;
                da.cmp(&db).then(a.cmp(&b))
            })
            .expect("more chiplets than clusters");
        sizes[i] -= 1;
        assigned -= 1;
    }
    Ok(sizes)
}
