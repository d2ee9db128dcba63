//! Hex colors and the golden-angle collision repair.

use std::collections::BTreeSet;

/// Hue step used to move a colliding color, in degrees.
pub const GOLDEN_ANGLE: f64 = 137.507_764_050_037_85;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    /// Accepts `#RRGGBB` or `RRGGBB`, any case.
    pub fn parse(s: &str) -> Option<Rgb> {
        let hex = s.trim().strip_prefix('#').unwrap_or(s.trim());
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).ok();
        Some(Rgb(byte(0)?, byte(2)?, byte(4)?))
    }

    pub fn to_hex(self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }

    /// Hue in degrees, saturation and lightness in `[0, 1]`.
    pub fn to_hsl(self) -> (f64, f64, f64) {
        let r = f64::from(self.0) / 255.0;
        let g = f64::from(self.1) / 255.0;
        let b = f64::from(self.2) / 255.0;
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let l = (max + min) / 2.0;
        let d = max - min;
        if d == 0.0 {
            return (0.0, 0.0, l);
        }
        let s = d / (1.0 - (2.0 * l - 1.0).abs());
        let h = if max == r {
            60.0 * (((g - b) / d).rem_euclid(6.0))
        } else if max == g {
            60.0 * ((b - r) / d + 2.0)
        } else {
            60.0 * ((r - g) / d + 4.0)
        };
        (h, s, l)
    }

    pub fn from_hsl(h: f64, s: f64, l: f64) -> Rgb {
        let h = h.rem_euclid(360.0);
        let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
        let x = c * (1.0 - ((h / 60.0).rem_euclid(2.0) - 1.0).abs());
        let m = l - c / 2.0;
        let (r, g, b) = match (h / 60.0) as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        let to_byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
        Rgb(to_byte(r), to_byte(g), to_byte(b))
    }
}

/// The `i`-th color of a generated palette (golden-angle hue walk).
pub fn palette_color(i: usize) -> String {
    Rgb::from_hsl(20.0 + GOLDEN_ANGLE * i as f64, 0.62, 0.48).to_hex()
}

/// Normalizes a model-proposed color, or `None` if it does not parse.
pub fn normalize_hex(s: &str) -> Option<String> {
    Rgb::parse(s).map(Rgb::to_hex)
}

/// Makes every color in `colors` distinct, in order. A color already taken
/// by an earlier entry is rotated by golden-angle hue steps until it is free;
/// near-grey colors get saturation first so the rotation has an effect.
///
/// Returns `(index, old, new)` for each changed entry.
pub fn make_distinct(colors: &mut [String]) -> Vec<(usize, String, String)> {
    let mut used = BTreeSet::new();
    let mut changes = Vec::new();
    for (i, color) in colors.iter_mut().enumerate() {
        let rgb = Rgb::parse(color).unwrap_or(Rgb(0x80, 0x80, 0x80));
        let hex = rgb.to_hex();
        if used.insert(hex.clone()) {
            *color = hex;
            continue;
        }
        let (h, mut s, mut l) = rgb.to_hsl();
        if s < 0.05 {
            s = 0.6;
        }
        if !(0.1..=0.9).contains(&l) {
            l = 0.5;
        }
        let mut step = 1;
        let replacement = loop {
            let candidate = Rgb::from_hsl(h + GOLDEN_ANGLE * f64::from(step), s, l).to_hex();
            if !used.contains(&candidate) {
                break candidate;
            }
            step += 1;
            if step % 360 == 0 {
                l = (l + 0.07).rem_euclid(0.8) + 0.1;
            }
        };
        used.insert(replacement.clone());
        changes.push((i, hex, replacement.clone()));
        *color = replacement;
    }
    changes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats() {
        assert_eq!(Rgb::parse("#ff0000"), Some(Rgb(255, 0, 0)));
        assert_eq!(Rgb::parse("00FF00"), Some(Rgb(0, 255, 0)));
        assert_eq!(Rgb::parse("#F00"), None);
        assert_eq!(Rgb::parse("#GG0000"), None);
        assert_eq!(Rgb(1, 171, 255).to_hex(), "#01ABFF");
    }

    #[test]
    fn hsl_round_trip_on_primaries() {
        for rgb in [Rgb(255, 0, 0), Rgb(0, 128, 255), Rgb(30, 200, 90), Rgb(128, 128, 128)] {
            let (h, s, l) = rgb.to_hsl();
            assert_eq!(Rgb::from_hsl(h, s, l), rgb);
        }
    }

    #[test]
    fn collision_moves_second_by_one_golden_step() {
        let mut colors = vec!["#FF0000".to_string(), "#ff0000".to_string()];
        let changes = make_distinct(&mut colors);
        let expected = Rgb::from_hsl(GOLDEN_ANGLE, 1.0, 0.5).to_hex();
        assert_eq!(colors, vec!["#FF0000".to_string(), expected.clone()]);
        assert_eq!(changes, vec![(1, "#FF0000".to_string(), expected)]);
    }

    #[test]
    fn many_greys_become_distinct() {
        let mut colors = vec!["#808080".to_string(); 50];
        make_distinct(&mut colors);
        let set: BTreeSet<_> = colors.iter().collect();
        assert_eq!(set.len(), 50);
    }

    #[test]
    fn palette_is_distinct_for_a_large_cast() {
        let set: BTreeSet<_> = (0..100).map(palette_color).collect();
        assert!(set.len() >= 95);
    }
}
