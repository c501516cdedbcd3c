//! Fixed-width big-endian bit packing for table entries.

/// Minimum width that can represent every code below `total`.
pub fn entry_width(total: u32) -> u8 {
    if total <= 1 {
        0
    } else {
        (32 - (total - 1).leading_zeros()) as u8
    }
}

pub fn packed_len(count: usize, width: u8) -> usize {
    (count * width as usize).div_ceil(8)
}

/// Packs `codes` at `width` bits each, most significant bit first, padding
/// only the final byte.
pub fn pack(codes: &[u32], width: u8) -> Vec<u8> {
    let mut out = vec![0u8; packed_len(codes.len(), width)];
    if width == 0 {
        return out;
    }
    let w = width as usize;
    for (i, &code) in codes.iter().enumerate() {
        debug_assert!(w == 32 || code >> w == 0);
        let mut bit = i * w;
        for k in (0..w).rev() {
            if (code >> k) & 1 == 1 {
                out[bit / 8] |= 0x80 >> (bit % 8);
            }
            bit += 1;
        }
    }
    out
}

/// Reads entry `i`. The caller guarantees `i` lies inside the packed array.
#[inline]
pub fn unpack(payload: &[u8], width: u8, i: usize) -> u32 {
    if width == 0 {
        return 0;
    }
    let w = width as usize;
    let bit = i * w;
    let start = bit / 8;
    let shift_in = bit % 8;
    let mut buf = [0u8; 8];
    let end = (start + 5).min(payload.len());
    buf[..end - start].copy_from_slice(&payload[start..end]);
    let word = u64::from_be_bytes(buf);
    ((word << shift_in) >> (64 - w)) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn widths() {
        assert_eq!(entry_width(1), 0);
        assert_eq!(entry_width(2), 1);
        assert_eq!(entry_width(243), 8);
        assert_eq!(entry_width(252), 8);
        assert_eq!(entry_width(256), 8);
        assert_eq!(entry_width(257), 9);
        assert_eq!(entry_width(u32::MAX), 32);
        assert_eq!(packed_len(120, 8), 120);
        assert_eq!(packed_len(3, 5), 2);
    }

    #[test]
    fn msb_first_layout() {
        // 0b101, 0b011 at width 3 -> 1010_1100
        assert_eq!(pack(&[5, 3], 3), vec![0b1010_1100]);
        assert_eq!(unpack(&[0b1010_1100], 3, 0), 5);
        assert_eq!(unpack(&[0b1010_1100], 3, 1), 3);
    }

    proptest! {
        #[test]
        fn pack_unpack(width in 1u8..=32, raw in prop::collection::vec(any::<u32>(), 0..64)) {
            let codes: Vec<u32> = raw.iter().map(|&c| if width == 32 { c } else { c & ((1u32 << width) - 1) }).collect();
            let packed = pack(&codes, width);
            prop_assert_eq!(packed.len(), packed_len(codes.len(), width));
            for (i, &c) in codes.iter().enumerate() {
                prop_assert_eq!(unpack(&packed, width, i), c);
            }
        }
    }
}
