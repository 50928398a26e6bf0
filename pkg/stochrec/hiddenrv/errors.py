#!/usr/bin/env python
# encoding: utf-8

"""
exception hierarchy shared by all modules; `exit_code` is what the
command line reports when the exception escapes a command
"""


class HiddenRVError (Exception):
    """
    base class for every error raised by the toolkit
    """
    exit_code = 2

    def __init__ (self, message="", **evidence):
        super().__init__(message)
        self.evidence = evidence


class ConfigError (HiddenRVError):
    exit_code = 3


class DegenerateModel (HiddenRVError):
    """a sampled diagonal entry of A is exactly zero"""
    exit_code = 3


class NoRoot (HiddenRVError):
    """E|A_i|^s stays below 1 over the whole search range"""
    pass


class NegativeDriftViolated (HiddenRVError):
    """E log|A_i| >= 0"""
    pass


class Unsupported (HiddenRVError):
    exit_code = 3


class OutsideDomain (HiddenRVError):
    """the tilted expectation diverges at the requested point"""
    pass


class TraceDiverged (HiddenRVError):

    def __init__ (self, message="", last_point=None, **evidence):
        super().__init__(message, **evidence)
        self.last_point = last_point


class OpenArc (HiddenRVError):
    """
    the level set leaves the unit square; `trace` holds the points
    collected before the exit
    """

    def __init__ (self, message="", trace=None, **evidence):
        super().__init__(message, **evidence)
        self.trace = trace


class NotFound (HiddenRVError):
    """no certified critical point inside the open unit square"""
    pass


class NonContracting (HiddenRVError):
    pass


class RejectionStall (HiddenRVError):
    pass


class NonTransient (HiddenRVError):
    pass


class GroupMismatch (HiddenRVError):
    pass
