import os
import hashlib

import numpy as np
import simplejson


def _plain(obj):
    if isinstance(obj, dict):
        return dict((str(k), _plain(v)) for k, v in obj.items())
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def canonical_json(obj):
    "Sorted-key, whitespace-free JSON; equal objects give equal text."
    return simplejson.dumps(_plain(obj), sort_keys=True, separators=(',', ':'))


def config_hash(obj):
    '''Short sha1 of the canonical JSON of ``obj``'''
    return hashlib.sha1(canonical_json(obj).encode('utf-8')).hexdigest()[:16]


def ensure_dir(dirname):
    if dirname and not os.path.exists(dirname):
        os.makedirs(dirname)
    return dirname
