def reverse_text(s: str) -> str:
    return s
