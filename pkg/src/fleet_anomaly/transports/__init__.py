"""
ADMM 브로드캐스트 전송 계층 모듈
"""
