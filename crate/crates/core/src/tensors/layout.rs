/// Row-major strides for `dims`.
pub fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    strides
}

/// Odometer over a row-major index space; the last position varies fastest.
#[derive(Clone, Debug)]
pub struct MultiIndex {
    dims: Vec<usize>,
    idx: Vec<usize>,
}

impl MultiIndex {
    pub fn new(dims: &[usize]) -> Self {
        MultiIndex { dims: dims.to_vec(), idx: vec![0; dims.len()] }
    }

    pub fn get(&self) -> &[usize] {
        &self.idx
    }

    /// Steps to the next index, wrapping to all zeros after the last one.
    pub fn advance(&mut self) {
        for p in (0..self.dims.len()).rev() {
            self.idx[p] += 1;
            if self.idx[p] < self.dims[p] {
                return;
            }
            self.idx[p] = 0;
        }
    }
}

/// Copies the strided view `(base, dims, strides)` of `src` into a dense
/// row-major vector.
pub(crate) fn gather_strided<T: Copy>(src: &[T], base: usize, dims: &[usize], strides: &[usize]) -> Vec<T> {
    let len: usize = dims.iter().product();
    let mut out = Vec::with_capacity(len);
    if dims.is_empty() {
        out.push(src[base]);
        return out;
    }
    let last = dims.len() - 1;
    let (inner, inner_stride) = (dims[last], strides[last]);
    let mut idx = vec![0usize; last];
    let mut off = base;
    loop {
        if inner_stride == 1 {
            out.extend_from_slice(&src[off..off + inner]);
        } else {
            out.extend((0..inner).map(|k| src[off + k * inner_stride]));
        }
        // advance outer odometer
        let mut p = last;
        loop {
            if p == 0 {
                return out;
            }
            p -= 1;
            idx[p] += 1;
            off += strides[p];
            if idx[p] < dims[p] {
                break;
            }
            off -= strides[p] * dims[p];
            idx[p] = 0;
        }
    }
}

/// Writes dense row-major `block` into the strided view `(base, dims, strides)` of `dst`.
pub(crate) fn scatter_strided<T: Copy>(dst: &mut [T], base: usize, dims: &[usize], strides: &[usize], block: &[T]) {
    if dims.is_empty() {
        dst[base] = block[0];
        return;
    }
    let last = dims.len() - 1;
    let (inner, inner_stride) = (dims[last], strides[last]);
    let mut idx = vec![0usize; last];
    let mut off = base;
    let mut src = 0usize;
    loop {
        for k in 0..inner {
            dst[off + k * inner_stride] = block[src + k];
        }
        src += inner;
        let mut p = last;
        loop {
            if p == 0 {
                return;
            }
            p -= 1;
            idx[p] += 1;
            off += strides[p];
            if idx[p] < dims[p] {
                break;
            }
            off -= strides[p] * dims[p];
            idx[p] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_and_odometer() {
        assert_eq!(row_major_strides(&[2, 3, 4]), vec![12, 4, 1]);
        assert_eq!(row_major_strides(&[]), Vec::<usize>::new());
        let mut m = MultiIndex::new(&[2, 2]);
        let mut seen = vec![];
        for _ in 0..4 {
            seen.push(m.get().to_vec());
            m.advance();
        }
        assert_eq!(seen, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(m.get(), &[0, 0]);
    }

    #[test]
    fn gather_transposes() {
        let src: Vec<u32> = (0..6).collect();
        // 2x3 read as 3x2 transpose
        assert_eq!(gather_strided(&src, 0, &[3, 2], &[1, 3]), vec![0, 3, 1, 4, 2, 5]);
        let mut dst = vec![0u32; 6];
        scatter_strided(&mut dst, 0, &[3, 2], &[1, 3], &[0, 3, 1, 4, 2, 5]);
        assert_eq!(dst, src);
    }
}
