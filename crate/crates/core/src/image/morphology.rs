use std::collections::VecDeque;

use super::BinaryImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

/// Connected-component labelling of the set pixels. Label 0 is background;
/// components are numbered from 1 in raster order of their first pixel.
#[derive(Debug, Clone)]
pub struct Components {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    /// `sizes[k]` is the pixel count of label `k + 1`.
    pub sizes: Vec<usize>,
    /// Inclusive-exclusive `(x0, y0, x1, y1)` per label.
    pub bounds: Vec<(usize, usize, usize, usize)>,
    pub touches_border: Vec<bool>,
}

impl Components {
    /// Label of the largest component; ties go to the lowest label.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(usize, u32)> = None;
        for (i, &s) in self.sizes.iter().enumerate() {
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, i as u32 + 1));
            }
        }
        best.map(|(_, l)| l)
    }

    pub fn mask(&self, label: u32) -> BinaryImage {
        BinaryImage::from_fn(self.width, self.height, |x, y| {
            self.labels[y * self.width + x] == label
        })
    }
}

pub fn connected_components(img: &BinaryImage, connectivity: Connectivity) -> Components {
    let (w, h) = (img.width(), img.height());
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut bounds = Vec::new();
    let mut touches = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !img.bits()[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        let mut b = (usize::MAX, usize::MAX, 0, 0);
        let mut border = false;
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            size += 1;
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x + 1);
            b.3 = b.3.max(y + 1);
            border |= x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            for &(dx, dy) in connectivity.offsets() {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if img.bits()[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
        bounds.push(b);
        touches.push(border);
    }
    Components {
        width: w,
        height: h,
        labels,
        sizes,
        bounds,
        touches_border: touches,
    }
}

/// Sliding max (dilate) or min (erode) over a square window, separably.
/// Window cells outside the image are ignored.
fn square_filter(img: &BinaryImage, radius: usize, dilate: bool) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    if radius == 0 || w == 0 || h == 0 {
        return img.clone();
    }
    let hit = |v: bool| if dilate { v } else { !v };
    // Row pass using prefix counts of "hit" pixels.
    let mut rows = vec![false; w * h];
    let mut prefix = vec![0usize; w + 1];
    for y in 0..h {
        for x in 0..w {
            prefix[x + 1] = prefix[x] + usize::from(hit(img.get(x, y)));
        }
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius + 1).min(w);
            rows[y * w + x] = prefix[hi] - prefix[lo] > 0;
        }
    }
    let mut out = BinaryImage::new(w, h);
    let mut prefix = vec![0usize; h + 1];
    for x in 0..w {
        for y in 0..h {
            prefix[y + 1] = prefix[y] + usize::from(rows[y * w + x]);
        }
        for y in 0..h {
            let lo = y.saturating_sub(radius);
            let hi = (y + radius + 1).min(h);
            let any_hit = prefix[hi] - prefix[lo] > 0;
            out.set(x, y, if dilate { any_hit } else { !any_hit });
        }
    }
    out
}

/// Dilation by a `(2r+1)x(2r+1)` square.
pub fn dilate(img: &BinaryImage, radius: usize) -> BinaryImage {
    square_filter(img, radius, true)
}

/// Erosion by a `(2r+1)x(2r+1)` square; the outside of the image does not erode.
pub fn erode(img: &BinaryImage, radius: usize) -> BinaryImage {
    square_filter(img, radius, false)
}

/// Sets every background region not 4-connected to the image border.
pub fn flood_fill_holes(img: &BinaryImage) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |x: usize, y: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        let i = y * w + x;
        if !img.bits()[i] && !outside[i] {
            outside[i] = true;
            queue.push_back(i);
        }
    };
    for x in 0..w {
        seed(x, 0, &mut outside, &mut queue);
        seed(x, h - 1, &mut outside, &mut queue);
    }
    for y in 0..h {
        seed(0, y, &mut outside, &mut queue);
        seed(w - 1, y, &mut outside, &mut queue);
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if !img.bits()[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        }
    }
    BinaryImage::from_fn(w, h, |x, y| !outside[y * w + x])
}

/// Removes foreground components (8-connected) that touch the image border.
pub fn clear_border_structures(img: &BinaryImage) -> BinaryImage {
    let cc = connected_components(img, Connectivity::Eight);
    BinaryImage::from_fn(img.width(), img.height(), |x, y| {
        let l = cc.labels[y * img.width() + x];
        l != 0 && !cc.touches_border[l as usize - 1]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_binary(seed: u64, w: usize, h: usize, density: f64) -> BinaryImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BinaryImage::from_fn(w, h, |_, _| rng.random::<f64>() < density)
    }

    /// Brute-force dilation: any set pixel within the Chebyshev radius.
    fn naive_dilate(img: &BinaryImage, r: isize) -> BinaryImage {
        BinaryImage::from_fn(img.width(), img.height(), |x, y| {
            (-r..=r).any(|dy| (-r..=r).any(|dx| img.get_or_false(x as isize + dx, y as isize + dy)))
        })
    }

    #[test]
    fn dilate_matches_brute_force() {
        for seed in 0..10 {
            let img = random_binary(seed, 23, 17, 0.05);
            for r in 1..4 {
                assert_eq!(dilate(&img, r), naive_dilate(&img, r as isize));
            }
        }
    }

    #[test]
    fn closing_contains_original_on_random_images() {
        for seed in 0..100 {
            let img = random_binary(seed, 32, 24, 0.3);
            let r = 1 + (seed as usize % 3);
            assert!(img.is_subset_of(&erode(&dilate(&img, r), r)));
        }
    }

    #[test]
    fn erode_dilate_duality_on_border_free_shape() {
        let img =
            BinaryImage::from_fn(30, 30, |x, y| (8..20).contains(&x) && (10..22).contains(&y));
        let lhs = erode(&img, 2);
        let rhs = dilate(&img.complement(), 2).complement();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn ring_interior_is_filled() {
        let img = BinaryImage::from_fn(40, 40, |x, y| {
            let d = ((x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2)).sqrt();
            (8.0..11.0).contains(&d)
        });
        let filled = flood_fill_holes(&img);
        for y in 0..40 {
            for x in 0..40 {
                let d = ((x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2)).sqrt();
                if d < 8.0 {
                    assert!(filled.get(x, y));
                }
                if d > 11.5 {
                    assert!(!filled.get(x, y));
                }
            }
        }
    }

    #[test]
    fn border_blob_is_cleared() {
        let img = BinaryImage::from_fn(64, 64, |x, y| {
            let left = x < 10 && (20..40).contains(&y);
            let centre = (28..36).contains(&x) && (28..36).contains(&y);
            left || centre
        });
        let cleared = clear_border_structures(&img);
        let expected = BinaryImage::from_fn(64, 64, |x, y| {
            (28..36).contains(&x) && (28..36).contains(&y)
        });
        assert_eq!(cleared, expected);
    }

    #[test]
    fn components_report_sizes_and_bounds() {
        let img = BinaryImage::from_fn(10, 10, |x, y| {
            (x < 2 && y < 2) || (x >= 5 && y >= 5 && x < 9)
        });
        let cc = connected_components(&img, Connectivity::Eight);
        assert_eq!(cc.sizes, vec![4, 20]);
        assert_eq!(cc.largest(), Some(2));
        assert_eq!(cc.bounds[1], (5, 5, 9, 10));
        assert_eq!(cc.touches_border, vec![true, true]);
    }

    proptest! {
        #[test]
        fn dilation_is_extensive_and_erosion_anti_extensive(seed in 0u64..1000, r in 1usize..3) {
            let img = random_binary(seed, 20, 15, 0.4);
            prop_assert!(img.is_subset_of(&dilate(&img, r)));
            prop_assert!(erode(&img, r).is_subset_of(&img));
            prop_assert_eq!(erode(&img, r), dilate(&img.complement(), r).complement());
        }
    }
}
