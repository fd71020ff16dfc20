//! Bundled 12x12 digit bitmaps; '#' marks an on pixel.

pub const GLYPH_SIZE: usize = 12;

#[rustfmt::skip]
const DIGITS: [[&str; 12]; 10] = [
    [ // 0
        "   ######   ",
        "  ##    ##  ",
        " ##      ## ",
        " ##      ## ",
        " ##     ### ",
        " ##    #### ",
        " ##   ## ## ",
        " ##  ##  ## ",
        " ## ##   ## ",
        " ####    ## ",
        "  ##    ##  ",
        "   ######   ",
    ],
    [ // 1
        "     ##     ",
        "    ###     ",
        "   ####     ",
        "  ## ##     ",
        "     ##     ",
        "     ##     ",
        "     ##     ",
        "     ##     ",
        "     ##     ",
        "     ##     ",
        "  ########  ",
        "  ########  ",
    ],
    [ // 2
        "   ######   ",
        "  ##    ##  ",
        " ##      ## ",
        "         ## ",
        "        ##  ",
        "       ##   ",
        "      ##    ",
        "     ##     ",
        "    ##      ",
        "   ##       ",
        " ########## ",
        " ########## ",
    ],
    [ // 3
        "   ######   ",
        "  ##    ##  ",
        "         ## ",
        "         ## ",
        "    #####   ",
        "    #####   ",
        "         ## ",
        "         ## ",
        "         ## ",
        " ##      ## ",
        "  ##    ##  ",
        "   ######   ",
    ],
    [ // 4
        "       ##   ",
        "      ###   ",
        "     ####   ",
        "    ## ##   ",
        "   ##  ##   ",
        "  ##   ##   ",
        " ##    ##   ",
        " ########## ",
        " ########## ",
        "       ##   ",
        "       ##   ",
        "       ##   ",
    ],
    [ // 5
        " ########## ",
        " ########## ",
        " ##         ",
        " ##         ",
        " ########   ",
        " #########  ",
        "        ##  ",
        "         ## ",
        "         ## ",
        " ##      ## ",
        "  ##    ##  ",
        "   ######   ",
    ],
    [ // 6
        "    ######  ",
        "   ##    ## ",
        "  ##        ",
        " ##         ",
        " ## #####   ",
        " ####   ##  ",
        " ###     ## ",
        " ##      ## ",
        " ##      ## ",
        " ##      ## ",
        "  ##    ##  ",
        "   ######   ",
    ],
    [ // 7
        " ########## ",
        " ########## ",
        "         ## ",
        "        ##  ",
        "        ##  ",
        "       ##   ",
        "       ##   ",
        "      ##    ",
        "      ##    ",
        "     ##     ",
        "     ##     ",
        "    ##      ",
    ],
    [ // 8
        "   ######   ",
        "  ##    ##  ",
        " ##      ## ",
        " ##      ## ",
        "  ##    ##  ",
        "   ######   ",
        "  ##    ##  ",
        " ##      ## ",
        " ##      ## ",
        " ##      ## ",
        "  ##    ##  ",
        "   ######   ",
    ],
    [ // 9
        "   ######   ",
        "  ##    ##  ",
        " ##      ## ",
        " ##      ## ",
        " ##      ## ",
        "  ##    ### ",
        "   ##### ## ",
        "         ## ",
        "        ##  ",
        "       ##   ",
        " ##   ##    ",
        "  #####     ",
    ],
];

/// Digit bitmap resampled to `size` x `size` by nearest neighbor,
/// values in {0.0, 1.0}.
pub fn glyph_bitmap(digit: u8, size: usize) -> Option<Vec<f64>> {
    if digit > 9 || size == 0 {
        return None;
    }
    let src = &DIGITS[digit as usize];
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        let sy = y * GLYPH_SIZE / size;
        let row = src[sy].as_bytes();
        for x in 0..size {
            let sx = x * GLYPH_SIZE / size;
            if sx < row.len() && row[sx] == b'#' {
                out[y * size + x] = 1.0;
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyphs_are_normalized_and_nonempty() {
        for d in 0..10u8 {
            let g = glyph_bitmap(d, GLYPH_SIZE).unwrap();
            assert_eq!(g.len(), 144);
            let on = g.iter().filter(|v| **v == 1.0).count();
            assert!(on > 15, "digit {d} too sparse");
            assert!(g.iter().all(|v| *v == 0.0 || *v == 1.0));
        }
    }

    #[test]
    fn bitmap_rows_are_exactly_twelve_wide() {
        for d in 0..10usize {
            for (r, row) in DIGITS[d].iter().enumerate() {
                assert_eq!(row.len(), GLYPH_SIZE, "digit {d} row {r}");
            }
        }
    }

    #[test]
    fn unknown_glyph_is_none() {
        assert!(glyph_bitmap(10, 12).is_none());
    }

    #[test]
    fn resampling_scales() {
        let g = glyph_bitmap(3, 8).unwrap();
        assert_eq!(g.len(), 64);
    }
}
