def add2(a: int, b: int) -> int:
    return b + a
