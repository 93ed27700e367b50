def clamp(x: int, lo: int, hi: int) -> int:
    bounded = max(x, lo)
    return min(bounded, hi)
