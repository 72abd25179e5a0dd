/// `c = a · b + beta · c` for strided row/column views.
///
/// `a` is `m × k` with strides `sa = (row, col)`, `b` is `k × n` with strides
/// `sb`, `c` is a contiguous row-major `m × n` buffer.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    sa: (usize, usize),
    b: &[f64],
    sb: (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n, "gemm: output buffer too small");
    if k > 0 {
        assert!(a.len() > (m - 1) * sa.0 + (k - 1) * sa.1, "gemm: lhs buffer too small");
        assert!(b.len() > (k - 1) * sb.0 + (n - 1) * sb.1, "gemm: rhs buffer too small");
    }
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
