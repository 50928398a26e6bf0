#!/usr/bin/env python
# encoding: utf-8

from stochrec import hiddenrv
import json
import logging
import sys


######################################################################
## main entry point

if __name__ == "__main__":
    # logging is optional: to debug, set the `logger` parameter
    # when initializing the `HiddenRVAPI` object
    logging.basicConfig(stream=sys.stdout, level=logging.WARNING)
    logger = logging.getLogger("HiddenRV")

    # initialize the analysis access
    hrv = hiddenrv.HiddenRVAPI(config_file="sre.cfg", logger=None)

    # enable this for profiling -- which is quite verbose!
    enable_profiling = False # True

    if enable_profiling:
        pr = hrv.start_profiling()

    # run it...
    responses = [
        hrv.tail_indices(),
        hrv.critical_point(),
        hrv.exceedance(t=500.0, eps=1.0),
        ]

    # report results
    for r in responses:
        if r.message:
            # error case
            print(r.message)
        else:
            print(json.dumps(r.serialize(), indent=4, ensure_ascii=False))

        hrv.report_perf(r.timing)

    if enable_profiling:
        hrv.stop_profiling(pr)
