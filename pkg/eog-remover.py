#!/usr/bin/env python
import sys

import Main
sys.exit(Main.main())
