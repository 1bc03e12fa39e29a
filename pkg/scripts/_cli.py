"""Turn a dataclass of experiment settings into command-line flags."""

import argparse
import dataclasses


def parse_into(cls, description=None, argv=None):
    ap = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, (list, tuple)):
            kind = type(default[0]) if default else str
            ap.add_argument(flag, type=kind, nargs="+", default=list(default))
        else:
            ap.add_argument(flag, type=type(default), default=default)
    return cls(**vars(ap.parse_args(argv)))
