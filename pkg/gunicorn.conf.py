# Gunicorn configuration for the report service
import multiprocessing
import os

# Server Socket
bind = f"0.0.0.0:{os.getenv('PORT', '8080')}"

# Worker Processes
# A /run request holds one sync worker for the whole simulation, and its ensembles use
# DWSIM_WORKERS threads. Workers times threads should not exceed the core count.
ensemble_threads = max(1, int(os.getenv('DWSIM_WORKERS', '1')))
workers = int(os.getenv('WORKERS', str(max(1, multiprocessing.cpu_count() // ensemble_threads))))
worker_class = 'sync'
timeout = int(os.getenv('RUN_TIMEOUT', '900'))
graceful_timeout = 30
# recycle after a few runs; padded grids and cached step weights stay resident otherwise
max_requests = 50
max_requests_jitter = 5

# Logging
accesslog = '-'
errorlog = '-'
loglevel = os.getenv('LOG_LEVEL', 'info').lower()
access_log_format = '%(h)s "%(r)s" %(s)s %(b)s %(D)s'

proc_name = 'dwsim'
