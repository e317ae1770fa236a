"""
Topic filter validation and matching (`+` single level, `#` multi level).
"""


def is_valid_topic_filter(topic_filter: str) -> bool:
    """
    Check a subscription filter.

    `+` must occupy a whole level; `#` must occupy the last level.
    """
    if not topic_filter or "\x00" in topic_filter:
        return False
    levels = topic_filter.split("/")
    for i, level in enumerate(levels):
        if "#" in level and (level != "#" or i != len(levels) - 1):
            return False
        if "+" in level and level != "+":
            return False
    return True


def topic_matches(topic_filter: str, topic: str) -> bool:
    """
    Return True if `topic` is matched by `topic_filter`.

    Examples:
        >>> topic_matches("ardueco/+/data", "ardueco/bike-001/data")
        True
        >>> topic_matches("ardueco/#", "ardueco")
        True
    """
    filter_levels = topic_filter.split("/")
    topic_levels = topic.split("/")
    for i, level in enumerate(filter_levels):
        if level == "#":
            return True
        if i >= len(topic_levels):
            return False
        if level != "+" and level != topic_levels[i]:
            return False
    return len(filter_levels) == len(topic_levels)
